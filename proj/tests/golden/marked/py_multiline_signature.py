def f(
    a,
    b,
):
    ⟦D"""doc"""⟧
    return a + b
