def f(x):
    f"""{x} is not a docstring"""
    return x
