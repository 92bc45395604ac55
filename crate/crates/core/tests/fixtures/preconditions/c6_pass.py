import tensorflow as tf


def normalize(x):
    return x / tf.reduce_max(x)


def target(x: tf.Tensor):
    return tf.nn.relu(normalize(x))


def main():
    return target(tf.ones([2, 2]))
