#include "spatialdnn/error.hpp"
