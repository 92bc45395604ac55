import tensorflow as tf


def target(x: tf.Tensor):
    rows = [row * 2.0 for row in tf.unstack(x)]
    return tf.stack(rows)


def main():
    return target(tf.ones([2, 2]))
