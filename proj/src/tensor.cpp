#include "gstk/tensor.hpp"

namespace gs {

bool& checked_mode() {
    static thread_local bool flag = false;
    return flag;
}

bool& grad_enabled() {
    static thread_local bool flag = true;
    return flag;
}

}  // namespace gs
