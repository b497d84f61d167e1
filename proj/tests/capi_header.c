#include "memrw/memrw.h"

/* Compiled as C to keep the header C-clean. */
const char* memrw_c_status_name(int status) { return memrw_status_name((memrw_status)status); }
