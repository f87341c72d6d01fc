#include "duodec/simclock.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace duodec {

void DeviceProfile::validate() const {
    const bool ok = draft_per_token_ms > 0.0 && std::isfinite(draft_per_token_ms) &&
                    target_base_ms > 0.0 && std::isfinite(target_base_ms) &&
                    target_slope_ms >= 0.0 && std::isfinite(target_slope_ms) &&
                    comm_ms > 0.0 && std::isfinite(comm_ms);
    if (!ok) {
        throw ProfileError("device profile durations must be positive (slope >= 0)");
    }
}

DeviceProfile DeviceProfile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ProfileError("cannot open profile file: " + path.string());
    }
    DeviceProfile p;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ls(line);
        std::string key;
        if (!(ls >> key) || key[0] == '#') {
            continue;
        }
        double value = 0.0;
        if (!(ls >> value)) {
            throw ProfileError(path.string() + ":" + std::to_string(line_no) +
                               ": expected 'key value'");
        }
        if (key == "draft_per_token_ms") {
            p.draft_per_token_ms = value;
        } else if (key == "target_base_ms") {
            p.target_base_ms = value;
        } else if (key == "target_slope_ms") {
            p.target_slope_ms = value;
        } else if (key == "comm_ms") {
            p.comm_ms = value;
        } else {
            throw ProfileError(path.string() + ":" + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
        }
    }
    p.validate();
    return p;
}

DeviceProfile DeviceProfile::balanced24() {
    return DeviceProfile{1.0, 24.0, 0.0, 0.2};
}

DeviceProfile DeviceProfile::figure1() {
    return DeviceProfile{3.0, 20.0, 0.5, 0.2};
}

double VirtualClock::duration_ms(const ClockEvent& event) const {
    return std::visit(
        [&](const auto& e) -> double {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, DraftEvent>) {
                return profile_.draft_ms(e.forwards);
            } else if constexpr (std::is_same_v<T, TargetPassEvent>) {
                return profile_.target_pass_ms(e.width);
            } else if constexpr (std::is_same_v<T, CommEvent>) {
                return profile_.comm_ms;
            } else {
                return profile_.verify_ms();
            }
        },
        event);
}

double VirtualClock::advance(const ClockEvent& event) {
    now_ms_ += duration_ms(event);
    return now_ms_;
}

double VirtualClock::parallel_advance(const ClockEvent& draft_event,
                                      const ClockEvent& target_event) {
    now_ms_ += std::max(duration_ms(draft_event), duration_ms(target_event));
    return now_ms_;
}

}  // namespace duodec
