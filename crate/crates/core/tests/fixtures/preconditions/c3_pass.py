import tensorflow as tf


def target(x: tf.Tensor):
    parts = []
    parts.append(x)
    parts.append(x * 2.0)
    return tf.stack(parts)


def main():
    return target(tf.ones([2, 2]))
