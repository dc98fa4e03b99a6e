#pragma once

#include <iosfwd>

namespace wismc {

// Exit codes: 0 success, 2 usage or parameter error, 3 data error, 4 resource error.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace wismc
