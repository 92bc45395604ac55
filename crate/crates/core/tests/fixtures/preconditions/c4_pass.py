import tensorflow as tf


def target(x: tf.Tensor):
    weights = tf.constant([[1.0, 0.0], [0.0, 1.0]])
    return tf.matmul(x, weights)


def main():
    return target(tf.ones([2, 2]))
