char c = '/'; char d = '"'; ⟦L// q⟧
