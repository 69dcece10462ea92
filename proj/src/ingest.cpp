#include "sitewarden/ingest.hpp"

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wdeprecated-enum-enum-conversion"
#include <opencv2/imgcodecs.hpp>
#include <opencv2/videoio.hpp>
#pragma GCC diagnostic pop

#include <algorithm>
#include <cmath>
#include <cctype>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sitewarden/error.hpp"
#include "sitewarden/util.hpp"

namespace sitewarden::ingest {

namespace {

constexpr std::int64_t kMaxLabelMs = 100LL * 60 * 1000;  // format bound: < 100 minutes

bool all_digits(std::string_view s) {
    return !s.empty() &&
           std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

char separator_char(TimeSeparator sep) {
    return sep == TimeSeparator::colon ? ':' : '_';
}

}  // namespace

bool TimeLabel::valid() const {
    // MM:SS:mmm with SS <= 59 and mmm <= 999 (mmm <= 999 holds by width).
    if (text.size() != 9 || text[2] != ':' || text[5] != ':') return false;
    std::string_view mm(text.data(), 2), ss(text.data() + 3, 2), mmm(text.data() + 6, 3);
    if (!all_digits(mm) || !all_digits(ss) || !all_digits(mmm)) return false;
    return (ss[0] - '0') * 10 + (ss[1] - '0') <= 59;
}

std::string render_time_label(std::int64_t ms, TimeSeparator sep) {
    if (ms < 0 || ms >= kMaxLabelMs) {
        throw Error(errc::time_out_of_range,
                    "capture time " + std::to_string(ms) + " ms exceeds the MM:SS:mmm bound");
    }
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02lld%c%02lld%c%03lld",
                  static_cast<long long>(ms / 60000), separator_char(sep),
                  static_cast<long long>((ms / 1000) % 60), separator_char(sep),
                  static_cast<long long>(ms % 1000));
    return buf;
}

std::int64_t time_label_to_ms(const TimeLabel& label) {
    if (!label.valid()) return -1;
    const std::string& t = label.text;
    auto num = [&](std::size_t pos, std::size_t n) {
        std::int64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) v = v * 10 + (t[pos + i] - '0');
        return v;
    };
    return num(0, 2) * 60000 + num(3, 2) * 1000 + num(6, 3);
}

std::string format_frame_filename(const Frame& frame, TimeSeparator sep) {
    return "Frame" + std::to_string(frame.index) + "-" +
           render_time_label(frame.capture_time_ms, sep) + ".jpg";
}

TimeLabel parse_time_from_filename(std::string_view name) {
    auto dash = name.find('-');
    if (dash == std::string_view::npos) return TimeLabel::sentinel();
    std::string_view rest = name.substr(dash + 1);
    auto dot = rest.rfind('.');
    if (dot != std::string_view::npos) rest = rest.substr(0, dot);
    std::string label(rest);
    // Accept the underscore form emitted for ':'-hostile filesystems and
    // normalize it to the canonical label.
    if (label.size() == 9 && label[2] == '_' && label[5] == '_') {
        label[2] = ':';
        label[5] = ':';
    }
    return TimeLabel{label};
}

std::vector<Frame> extract_frames(const std::filesystem::path& video_ref,
                                  const std::filesystem::path& out_dir,
                                  const ExtractOptions& options) {
    if (!(options.rate_hz > 0.0)) {
        throw Error(errc::invalid_rate, "sampling rate must be > 0");
    }
    cv::VideoCapture cap(video_ref.string());
    if (!cap.isOpened()) {
        throw Error(errc::unreadable_video, "cannot decode video: " + video_ref.string());
    }
    double fps = cap.get(cv::CAP_PROP_FPS);
    double source_frames = cap.get(cv::CAP_PROP_FRAME_COUNT);
    if (fps <= 0.0 || source_frames < 0.0) {
        throw Error(errc::unreadable_video, "video reports no timebase: " + video_ref.string());
    }
    double duration = source_frames / fps;
    // Number of sample instants t_i = i/rate with t_i < duration. The 1e-9
    // slack keeps a duration landing exactly on a sample instant from
    // spilling one extra frame through float noise.
    auto count = static_cast<std::int64_t>(std::ceil(duration * options.rate_hz - 1e-9));
    if (count < 0) count = 0;

    std::filesystem::create_directories(out_dir);
    std::string source_id =
        options.source_id.empty() ? video_ref.filename().string() : options.source_id;

    std::vector<Frame> frames;
    frames.reserve(static_cast<std::size_t>(count));
    cv::Mat current;
    std::int64_t loaded = -1;  // index of the source frame held in `current`
    for (std::int64_t i = 0; i < count; ++i) {
        double t = static_cast<double>(i) / options.rate_hz;
        auto want = static_cast<std::int64_t>(std::floor(t * fps + 1e-9));
        want = std::min<std::int64_t>(want, static_cast<std::int64_t>(source_frames) - 1);
        while (loaded < want) {
            if (!cap.read(current)) {
                throw Error(errc::unreadable_video,
                            "decode stopped at source frame " + std::to_string(loaded + 1));
            }
            ++loaded;
        }
        Frame frame;
        frame.index = static_cast<int>(i);
        frame.capture_time_ms = static_cast<std::int64_t>(std::llround(1000.0 * t));
        frame.source_id = source_id;
        frame.image_ref = out_dir / format_frame_filename(frame, options.separator);
        if (!cv::imwrite(frame.image_ref.string(), current)) {
            throw Error(errc::io_error, "cannot write frame image: " + frame.image_ref.string());
        }
        frames.push_back(std::move(frame));
    }
    write_frame_index(out_dir, frames);
    return frames;
}

std::vector<Frame> ingest_frame_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(errc::invalid_frame_dir, "not a directory: " + dir.string());
    }
    static const std::regex index_re(R"(^Frame(\d+)-)");
    std::vector<Frame> frames;
    std::vector<std::string> rejects;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        std::string ext = to_lower(entry.path().extension().string());
        if (ext != ".jpg" && ext != ".jpeg" && ext != ".png") continue;
        TimeLabel label = parse_time_from_filename(name);
        std::smatch m;
        if (label.is_sentinel() || !label.valid() || !std::regex_search(name, m, index_re)) {
            rejects.push_back(name);
            continue;
        }
        Frame frame;
        frame.index = std::stoi(m[1].str());
        frame.capture_time_ms = time_label_to_ms(label);
        frame.image_ref = entry.path();
        frame.source_id = dir.filename().string();
        frames.push_back(std::move(frame));
    }
    if (!rejects.empty()) {
        std::sort(rejects.begin(), rejects.end());
        std::ostringstream msg;
        msg << rejects.size() << " file(s) do not follow the frame filename grammar:";
        for (const auto& r : rejects) msg << " " << r;
        throw Error(errc::invalid_frame_dir, msg.str());
    }
    std::sort(frames.begin(), frames.end(),
              [](const Frame& a, const Frame& b) { return a.index < b.index; });
    for (std::size_t i = 1; i < frames.size(); ++i) {
        if (frames[i].index == frames[i - 1].index ||
            frames[i].capture_time_ms <= frames[i - 1].capture_time_ms) {
            throw Error(errc::invalid_frame_dir,
                        "frame order violation near index " + std::to_string(frames[i].index) +
                            " (indices and capture times must be strictly increasing)");
        }
    }
    return frames;
}

std::optional<std::vector<Frame>> load_frame_index(const std::filesystem::path& dir) {
    const auto index_path = dir / "index.jsonl";
    if (!std::filesystem::is_regular_file(index_path)) return std::nullopt;
    std::vector<Frame> frames;
    try {
        for_each_jsonl(index_path, [&](std::size_t, const nlohmann::json& record) {
            Frame frame;
            frame.index = record.at("index").get<int>();
            frame.capture_time_ms = record.at("capture_time_ms").get<std::int64_t>();
            frame.image_ref = dir / record.at("file").get<std::string>();
            frame.source_id = dir.filename().string();
            frames.push_back(std::move(frame));
        });
    } catch (const std::exception&) {
        return std::nullopt;
    }
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (!std::filesystem::is_regular_file(frames[i].image_ref)) return std::nullopt;
        if (i > 0 && (frames[i].index <= frames[i - 1].index ||
                      frames[i].capture_time_ms <= frames[i - 1].capture_time_ms)) {
            return std::nullopt;
        }
    }
    return frames;
}

void write_frame_index(const std::filesystem::path& out_dir, const std::vector<Frame>& frames) {
    std::ostringstream out;
    for (const auto& frame : frames) {
        nlohmann::json record{
            {"index", frame.index},
            {"capture_time_ms", frame.capture_time_ms},
            {"time_label", render_time_label(frame.capture_time_ms)},
            {"file", frame.image_ref.filename().string()},
        };
        out << record.dump() << "\n";
    }
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir / "index.jsonl", out.str());
}

}  // namespace sitewarden::ingest
