⟦B/***** banner *****/⟧
class Z {}
