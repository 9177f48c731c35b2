def f():
    U"""Upper-case prefix."""
