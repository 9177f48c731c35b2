def f(k=lambda v: v):
    ⟦D"""doc"""⟧
    return k
