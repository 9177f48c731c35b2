int x; ⟦L// naïve café ✓⟧
