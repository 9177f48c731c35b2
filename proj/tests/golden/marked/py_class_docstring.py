class A:
    ⟦D'''A thing.'''⟧

    x = 1
