/**
 * Adds.
 * @return sum
 */
int add(int a, int b);
