#pragma once

// Torch's logging headers define a CHECK macro; doctest's must win.
#include <torch/torch.h>
#undef CHECK
#include "doctest.h"
