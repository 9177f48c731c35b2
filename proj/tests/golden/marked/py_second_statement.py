def f():
    x = 1
    """not a docstring"""
    return x
