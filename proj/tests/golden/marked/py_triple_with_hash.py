s = """ # inside
# still inside
"""  ⟦L# after⟧
