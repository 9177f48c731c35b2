def f():
    b"""bytes are not docstrings"""
