import tensorflow as tf


def target(x: tf.Tensor):
    for row in tf.unstack(x):
        yield row * 2.0


def main():
    return list(target(tf.ones([2, 2])))
