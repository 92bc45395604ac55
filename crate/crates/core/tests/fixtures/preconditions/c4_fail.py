import tensorflow as tf


def target(x: tf.Tensor):
    weights = tf.Variable(tf.ones([2, 2]))
    return tf.matmul(x, weights)


def main():
    return target(tf.ones([2, 2]))
