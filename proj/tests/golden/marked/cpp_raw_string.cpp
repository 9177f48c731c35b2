auto r = R"(// not /* comment */)"; ⟦L// yes⟧
