s = r"\"#still string"  ⟦L# real⟧
