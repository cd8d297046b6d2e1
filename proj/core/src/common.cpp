#include "mmtrack/common.hpp"

#include <algorithm>
#include <limits>

namespace mmtrack
{

std::string_view to_string(ErrorCode code)
{
  switch (code) {
  case ErrorCode::PathOutOfWindow: return "PathOutOfWindow";
  case ErrorCode::DimensionMismatch: return "DimensionMismatch";
  case ErrorCode::ResolutionTooFine: return "ResolutionTooFine";
  case ErrorCode::EmptyEstimate: return "EmptyEstimate";
  case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
  case ErrorCode::NotLocalizable: return "NotLocalizable";
  case ErrorCode::StartOutsideLane: return "StartOutsideLane";
  case ErrorCode::InsufficientHistory: return "InsufficientHistory";
  case ErrorCode::EmptyList: return "EmptyList";
  case ErrorCode::InvalidArgument: return "InvalidArgument";
  case ErrorCode::Config: return "Config";
  case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(PathOrder order)
{
  switch (order) {
  case PathOrder::LOS: return "LOS";
  case PathOrder::FirstOrder: return "FirstOrder";
  case PathOrder::HigherOrder: return "HigherOrder";
  case PathOrder::Unknown: return "Unknown";
  }
  return "Unknown";
}

PathOrder path_order_from_string(std::string_view s)
{
  if (s == "LOS") return PathOrder::LOS;
  if (s == "FirstOrder") return PathOrder::FirstOrder;
  if (s == "HigherOrder") return PathOrder::HigherOrder;
  if (s == "Unknown") return PathOrder::Unknown;
  throw Error(ErrorCode::InvalidArgument, "unknown path order '" + std::string(s) + "'");
}

double reference_tdoa(std::vector<PathParams> &paths)
{
  if (paths.empty()) return 0.0;
  double t_min = std::numeric_limits<double>::infinity();
  for (const auto &p : paths) t_min = std::min(t_min, p.toa);
  for (auto &p : paths) p.tdoa = p.toa - t_min;
  return t_min;
}

} // namespace mmtrack
