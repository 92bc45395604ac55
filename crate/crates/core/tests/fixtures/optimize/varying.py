import tensorflow as tf


@tf.function
def scale(data, factor):
    return data * factor


def run(data):
    small = scale(data, 1)
    large = scale(data, 2)
    return small + large
