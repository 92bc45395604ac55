import tensorflow as tf


@tf.function
def target(x: tf.Tensor):
    return tf.reduce_sum(x * 2.0)


def main():
    return target(tf.ones([2, 2]))
