#pragma once

#include "idcss/dense.hpp"

namespace fixture {

// Rank 2 with duplicated columns: 0 == 2 and 1 == 3.
inline idcss::Matrix duplicated_columns() {
    idcss::Matrix a(4, 4);
    a << 1, 0, 1, 0,
         0, 1, 0, 1,
         0, 0, 0, 0,
         0, 0, 0, 0;
    return a;
}

// Full column rank, but fl(chi^T chi) is exactly singular.
inline idcss::Matrix gram_loss() {
    idcss::Matrix a(3, 2);
    a << 1, 1, 1e-9, 0, 0, 1e-9;
    return a;
}

}  // namespace fixture
