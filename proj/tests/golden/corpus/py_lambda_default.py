def f(k=lambda v: v):
    """doc"""
    return k
