class A: ⟦D"""x"""⟧; y = 1
