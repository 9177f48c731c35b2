def f():
    """d"""  # c
    return 2
