int q = a / b / c; /* div */
int *p = &q; int h = *p/2;
