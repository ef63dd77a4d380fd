#pragma once

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <chrono>
#include <string>
#include <vector>

namespace sse {

struct Frame {
    uint64_t id = 0;
    std::string event;
    nlohmann::json data;
};

// Reads /events until `count` frames arrived or the deadline passed.
inline std::vector<Frame> read(int port, uint64_t from, size_t count,
                               std::chrono::milliseconds deadline = std::chrono::seconds(10),
                               std::optional<uint64_t> last_event_id = {})
{
    httplib::Client cli("127.0.0.1", port);
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(deadline).count() + 1, 0);
    std::vector<Frame> frames;
    std::string buf;
    const auto stop_at = std::chrono::steady_clock::now() + deadline;
    httplib::Headers headers;
    if (last_event_id) headers.emplace("Last-Event-ID", std::to_string(*last_event_id));
    cli.Get("/events?from=" + std::to_string(from), headers, [&](const char* data, size_t len) {
        buf.append(data, len);
        size_t cut;
        while ((cut = buf.find("\n\n")) != std::string::npos) {
            const std::string block = buf.substr(0, cut);
            buf.erase(0, cut + 2);
            Frame f;
            bool any = false;
            size_t pos = 0;
            while (pos < block.size()) {
                size_t eol = block.find('\n', pos);
                if (eol == std::string::npos) eol = block.size();
                const std::string line = block.substr(pos, eol - pos);
                pos = eol + 1;
                if (line.rfind("id: ", 0) == 0) f.id = std::stoull(line.substr(4));
                else if (line.rfind("event: ", 0) == 0) f.event = line.substr(7);
                else if (line.rfind("data: ", 0) == 0) {
                    f.data = nlohmann::json::parse(line.substr(6));
                    any = true;
                }
            }
            if (any) frames.push_back(std::move(f));
        }
        return frames.size() < count && std::chrono::steady_clock::now() < stop_at;
    });
    return frames;
}

} // namespace sse
