def f():
    ⟦D"""a \""" b"""⟧
