/* a */ int x; // b
