String s = "C:\\"; ⟦L// path⟧
