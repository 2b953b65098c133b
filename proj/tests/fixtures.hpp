#pragma once

#include <string>
#include <vector>

#include "mdsession/ingestion.hpp"

namespace fixture {

inline mdsession::AppSession app(const std::string& user, mdsession::DeviceType type, long start, long end,
                                 const std::string& app_id = "app", const std::string& category = "Other") {
  const std::string device = user + (type == mdsession::DeviceType::smartphone ? "-sp" : "-tab");
  return {user, device, type, mdsession::Platform::android, app_id, category, mdsession::Interval(start, end)};
}

// App sessions A..G of the two-device reconstruction example (tw = 60).
inline std::vector<mdsession::AppSession> two_device_example() {
  using mdsession::DeviceType;
  return {app("u", DeviceType::smartphone, 0, 100, "A"),   app("u", DeviceType::smartphone, 100, 200, "B"),
          app("u", DeviceType::smartphone, 230, 300, "C"), app("u", DeviceType::smartphone, 1000, 1100, "D"),
          app("u", DeviceType::tablet, 150, 400, "E"),     app("u", DeviceType::tablet, 420, 600, "F"),
          app("u", DeviceType::tablet, 1050, 1200, "G")};
}

}  // namespace fixture
