#pragma once

#include <filesystem>
#include <variant>

namespace duodec {

// Simulated per-forward latencies for the two worker roles. Times are
// milliseconds of virtual time.
//
// File format, same line-oriented key/value scheme as models:
//   draft_per_token_ms 1.0
//   target_base_ms 24.0
//   target_slope_ms 0.0
//   comm_ms 0.2
struct DeviceProfile {
    double draft_per_token_ms = 1.0;
    double target_base_ms = 24.0;
    double target_slope_ms = 0.0;
    double comm_ms = 0.2;

    // affine in the verified-batch width
    double target_pass_ms(int width) const {
        return target_base_ms + target_slope_ms * static_cast<double>(width);
    }
    double draft_ms(int forwards) const {
        return draft_per_token_ms * static_cast<double>(forwards);
    }
    // verification is a fixed small constant relative to a single-token pass
    double verify_ms() const { return 0.01 * target_pass_ms(1); }

    void validate() const;  // throws ProfileError on bad durations

    static DeviceProfile load(const std::filesystem::path& path);

    // Default profile: per-pass target cost 24x the draft's per-token cost,
    // so the calibrated budget lands at 24.
    static DeviceProfile balanced24();
    // Alternative anchored to the draft-8 == verify-8 calibration point
    // (3 ms/token drafting vs 20 + 0.5k ms verification).
    static DeviceProfile figure1();
};

struct ProfileError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Clock events. Draft carries the number of draft forwards executed;
// TargetPass the width of the scored pass.
struct DraftEvent {
    int forwards = 0;
};
struct TargetPassEvent {
    int width = 0;
};
struct CommEvent {};
struct VerifyEvent {};

using ClockEvent = std::variant<DraftEvent, TargetPassEvent, CommEvent, VerifyEvent>;

// Deterministic virtual clock: identical profile + event sequence always
// yields the identical timeline.
class VirtualClock {
  public:
    explicit VirtualClock(DeviceProfile profile) : profile_(profile) { profile_.validate(); }

    double now_ms() const { return now_ms_; }
    const DeviceProfile& profile() const { return profile_; }

    double duration_ms(const ClockEvent& event) const;

    // advances by the profile-determined duration; returns the new time
    double advance(const ClockEvent& event);

    // the concurrency contract of duo mode: both events run in parallel and
    // the clock advances by the slower one
    double parallel_advance(const ClockEvent& draft_event, const ClockEvent& target_event);

  private:
    DeviceProfile profile_;
    double now_ms_ = 0.0;
};

}  // namespace duodec
