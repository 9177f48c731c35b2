class A:
    '''A thing.'''

    x = 1
