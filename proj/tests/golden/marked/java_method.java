class M {
    ⟦B/**
     * Sum.
     */⟧
    int sum(int a, int b) {
        return a + b; ⟦L// plain⟧
    }
}
