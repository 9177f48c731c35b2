⟦L// continued \
   comment line⟧
int y;
