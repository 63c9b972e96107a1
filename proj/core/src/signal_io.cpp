#include <ostream>
#include <string>

#include "cldeepc/lti_plant.hpp"

namespace cldeepc {

namespace {

void header_group(std::ostream& os, const char* name, int dim) {
  if (dim == 1) {
    os << ',' << name;
    return;
  }
  for (int i = 1; i <= dim; ++i) os << ',' << name << i;
}

void values(std::ostream& os, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) os << ',' << v(i);
}

}  // namespace

void write_signal_csv(std::ostream& os, const SignalLog& log) {
  const auto old_precision = os.precision(17);
  os << 'k';
  header_group(os, "u", log.inputs());
  header_group(os, "y", log.outputs());
  header_group(os, "e", log.outputs());
  header_group(os, "r", log.outputs());
  for (int i = 1; i <= log.states(); ++i) os << ",x" << i;
  os << '\n';
  for (std::size_t k = 0; k < log.size(); ++k) {
    os << k;
    values(os, log.u()[k]);
    values(os, log.y()[k]);
    values(os, log.e()[k]);
    values(os, log.r()[k]);
    values(os, log.x()[k]);
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace cldeepc
