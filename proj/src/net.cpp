#include "gaitlabel/net.hpp"

namespace gaitlabel {

template struct ResNet<float>;
template struct ResNet<double>;

}  // namespace gaitlabel
