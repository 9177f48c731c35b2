class A:
    """A."""
    def m(self):
        '''m.'''
        def inner():
            """inner."""
            return 0
        return inner
