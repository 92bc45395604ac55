import tensorflow as tf


def target(x):
    return tf.reduce_sum(x * 2.0)


def main():
    return target(tf.ones([2, 2]))
