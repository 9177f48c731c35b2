def f(a: int = 1, b: dict = {1: 2}) -> int:
    """Colons above sit inside brackets."""
    return a
