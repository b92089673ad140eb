#ifndef MULTIVIEW_HPP
#define MULTIVIEW_HPP

#include "multiview/common.hpp"
#include "multiview/netcore.hpp"
#include "multiview/simgen.hpp"
#include "multiview/spectral.hpp"
#include "multiview/pseudolik.hpp"
#include "multiview/coupling.hpp"
#include "multiview/inference.hpp"
#include "multiview/io.hpp"
#include "multiview/study.hpp"

#endif  // MULTIVIEW_HPP
