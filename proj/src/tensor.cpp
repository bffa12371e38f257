#include "mgd/tensor.hpp"

#include <sstream>

#include "mgd/error.hpp"

namespace mgd {

void HeadLayout::validate() const {
  grid.validate();
  if (num_anchors < 1 || num_classes < 1) {
    std::ostringstream os;
    os << "head needs at least one anchor and one class (k=" << num_anchors
       << ", n=" << num_classes << ")";
    throw ValidationError(os.str());
  }
}

HeadTensor::HeadTensor(const HeadLayout& layout, double fill) : layout_(layout) {
  layout_.validate();
  data_.assign(layout_.size(), fill);
}

}  // namespace mgd
