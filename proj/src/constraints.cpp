#include "psense/constraints.hpp"

#include "psense/io.hpp"

namespace psense {

namespace {

constexpr double kFloatMax = static_cast<double>(std::numeric_limits<float>::max());

double encode(double v) {
  if (std::isinf(v)) return v > 0 ? kFloatMax : -kFloatMax;
  return v;
}

double decode(double v) {
  if (v >= kFloatMax) return std::numeric_limits<double>::infinity();
  if (v <= -kFloatMax) return -std::numeric_limits<double>::infinity();
  return v;
}

}  // namespace

void write_constraints(const std::filesystem::path& header_path, const ConstraintSet<double>& c) {
  c.validate();
  Container out;
  out.meta = {{"kind", "constraint-set"}, {"infinite_bounds", "flt_max"}};
  for (const RealImaged* plane : {&c.lo_re, &c.hi_re, &c.lo_im, &c.hi_im}) {
    ComplexImaged p(c.height(), c.width());
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = encode(plane->data()[i]);
    out.planes.push_back(std::move(p));
  }
  out.planes.push_back(c.active.cast<double>().cast<Complex<double>>());
  write_container(header_path, out);
}

ConstraintSet<double> read_constraints(const std::filesystem::path& header_path) {
  const Container in = read_container(header_path);
  if (in.planes.size() != 5) {
    throw IoError(header_path.string() + ": constraint set needs 5 planes, found " + std::to_string(in.planes.size()));
  }
  const auto flag = in.meta.find("infinite_bounds");
  const bool decode_inf = flag != in.meta.end() && flag->second == "flt_max";
  ConstraintSet<double> c;
  RealImaged* planes[] = {&c.lo_re, &c.hi_re, &c.lo_im, &c.hi_im};
  for (int k = 0; k < 4; ++k) {
    *planes[k] = in.planes[static_cast<std::size_t>(k)].real();
    if (decode_inf) planes[k]->noalias() = planes[k]->unaryExpr(&decode);
  }
  c.active = in.planes[4].real().array() > 0.5;
  c.validate();
  return c;
}

}  // namespace psense
