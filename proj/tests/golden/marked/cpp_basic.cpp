⟦B/* a */⟧ int x; ⟦L// b⟧
