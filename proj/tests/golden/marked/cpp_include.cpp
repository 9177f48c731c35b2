#include <a//b.h>
#include "c/*d*/.h"
⟦L// done⟧
