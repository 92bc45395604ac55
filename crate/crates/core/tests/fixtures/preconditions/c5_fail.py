import tensorflow as tf


def target(x: tf.Tensor, depth: int):
    if depth == 0:
        return x
    return target(x * 2.0, depth - 1)


def main():
    return target(tf.ones([2, 2]), 3)
