x = 1 ⟦L# c⟧
y = 2
