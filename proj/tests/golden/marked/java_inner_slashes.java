⟦B/* // inner */⟧
int k;
