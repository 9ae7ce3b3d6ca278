#include "netcfg.hpp"

#include <cstdio>
#include <cstring>
#include <map>
#include <memory>

#include "serial.hpp"

namespace slimdet {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::convolutional: return "convolutional";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::upsample: return "upsample";
        case LayerKind::route: return "route";
        case LayerKind::shortcut: return "shortcut";
        case LayerKind::yolo: return "yolo";
    }
    return "?";
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::mish: return "mish";
        case Activation::leaky: return "leaky";
        case Activation::linear: return "linear";
        case Activation::sigmoid: return "sigmoid";
    }
    return "?";
}

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct KeyValue {
    std::string value;
    int line = 0;
    bool used = false;
};

struct Section {
    std::string name;
    int line = 0;
    std::map<std::string, KeyValue> keys;
};

std::vector<Section> split_sections(const std::string& text) {
    std::vector<Section> sections;
    int line_no = 0;
    size_t pos = 0;
    while (pos <= text.size()) {
        size_t nl = text.find('\n', pos);
        std::string raw = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
        pos = nl == std::string::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        size_t cut = raw.find_first_of("#;");
        if (cut != std::string::npos) raw = raw.substr(0, cut);
        std::string line = trim(raw);
        if (line.empty()) continue;

        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                fail(ErrorKind::parse, "malformed section header at line " + std::to_string(line_no) +
                                           ": '" + line + "'");
            Section s;
            s.name = trim(line.substr(1, line.size() - 2));
            s.line = line_no;
            sections.push_back(std::move(s));
            continue;
        }

        size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorKind::parse,
                 "malformed line " + std::to_string(line_no) + ": expected key=value, got '" + line + "'");
        if (sections.empty())
            fail(ErrorKind::parse, "malformed section structure: key=value at line " +
                                       std::to_string(line_no) + " before any section header");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            fail(ErrorKind::parse, "malformed line " + std::to_string(line_no) + ": empty key");
        sections.back().keys[key] = {value, line_no, false};
    }
    return sections;
}

long parse_long(const std::string& value, const std::string& key, int line) {
    size_t used = 0;
    long v = 0;
    try {
        v = std::stol(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty())
        fail(ErrorKind::parse, "bad integer '" + value + "' for key '" + key + "' at line " +
                                   std::to_string(line));
    return v;
}

float parse_float(const std::string& value, const std::string& key, int line) {
    size_t used = 0;
    float v = 0;
    try {
        v = std::stof(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != value.size() || value.empty())
        fail(ErrorKind::parse,
             "bad number '" + value + "' for key '" + key + "' at line " + std::to_string(line));
    return v;
}

std::vector<std::string> split_commas(const std::string& value) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos <= value.size()) {
        size_t comma = value.find(',', pos);
        std::string part = trim(value.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (!part.empty()) out.push_back(part);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

class SectionReader {
  public:
    explicit SectionReader(Section& s) : s_(s) {}

    bool has(const std::string& key) {
        auto it = s_.keys.find(key);
        if (it == s_.keys.end()) return false;
        it->second.used = true;
        return true;
    }

    long require_int(const std::string& key) {
        auto it = s_.keys.find(key);
        if (it == s_.keys.end())
            fail(ErrorKind::parse, "missing required key '" + key + "' in [" + s_.name +
                                       "] at line " + std::to_string(s_.line));
        it->second.used = true;
        return parse_long(it->second.value, key, it->second.line);
    }

    long get_int(const std::string& key, long fallback) {
        auto it = s_.keys.find(key);
        if (it == s_.keys.end()) return fallback;
        it->second.used = true;
        return parse_long(it->second.value, key, it->second.line);
    }

    float get_float(const std::string& key, float fallback) {
        auto it = s_.keys.find(key);
        if (it == s_.keys.end()) return fallback;
        it->second.used = true;
        return parse_float(it->second.value, key, it->second.line);
    }

    std::string get_str(const std::string& key, const std::string& fallback) {
        auto it = s_.keys.find(key);
        if (it == s_.keys.end()) return fallback;
        it->second.used = true;
        return it->second.value;
    }

    std::string require_str(const std::string& key) {
        auto it = s_.keys.find(key);
        if (it == s_.keys.end())
            fail(ErrorKind::parse, "missing required key '" + key + "' in [" + s_.name +
                                       "] at line " + std::to_string(s_.line));
        it->second.used = true;
        return it->second.value;
    }

    void collect_unknown(std::vector<std::string>* warnings) {
        if (!warnings) return;
        for (const auto& [key, kv] : s_.keys)
            if (!kv.used)
                warnings->push_back("line " + std::to_string(kv.line) + ": unknown key '" + key +
                                    "' in [" + s_.name + "]");
    }

  private:
    Section& s_;
};

Activation parse_activation(const std::string& name, int line) {
    if (name == "mish") return Activation::mish;
    if (name == "leaky") return Activation::leaky;
    if (name == "linear") return Activation::linear;
    if (name == "sigmoid" || name == "logistic") return Activation::sigmoid;
    fail(ErrorKind::parse, "unknown activation '" + name + "' at line " + std::to_string(line));
}

// Negative offsets count back from the layer being defined; absolute indices
// must also point strictly backward.
int resolve_reference(long v, size_t layer_index, int line) {
    long resolved = v < 0 ? static_cast<long>(layer_index) + v : v;
    if (resolved < 0 || resolved >= static_cast<long>(layer_index))
        fail(ErrorKind::parse, "bad reference " + std::to_string(v) + " at layer " +
                                   std::to_string(layer_index) + " (line " + std::to_string(line) +
                                   "): resolves outside earlier layers");
    return static_cast<int>(resolved);
}

std::string format_float(float v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(v));
    return buf;
}

}  // namespace

NetworkDef parse_cfg(const std::string& text, std::vector<std::string>* warnings) {
    std::vector<Section> sections = split_sections(text);
    if (sections.empty()) fail(ErrorKind::parse, "malformed config: no sections found");
    if (sections[0].name != "net" && sections[0].name != "network")
        fail(ErrorKind::parse, "malformed config: first section must be [net], got [" +
                                   sections[0].name + "]");

    NetworkDef net;
    {
        SectionReader r(sections[0]);
        net.input_width = static_cast<uint32_t>(r.require_int("width"));
        net.input_height = static_cast<uint32_t>(r.require_int("height"));
        net.input_channels = static_cast<uint32_t>(r.require_int("channels"));
        r.collect_unknown(warnings);
    }
    if (net.input_width == 0 || net.input_height == 0 || net.input_channels == 0)
        fail(ErrorKind::parse, "input dimensions must be positive");

    for (size_t si = 1; si < sections.size(); ++si) {
        Section& sec = sections[si];
        SectionReader r(sec);
        size_t idx = net.layers.size();
        LayerSpec layer;

        if (sec.name == "convolutional") {
            layer.kind = LayerKind::convolutional;
            layer.filters = static_cast<uint32_t>(r.require_int("filters"));
            layer.size = static_cast<uint32_t>(r.get_int("size", 1));
            layer.stride = static_cast<uint32_t>(r.get_int("stride", 1));
            layer.pad = r.get_int("pad", 0) != 0;
            layer.batch_normalize = r.get_int("batch_normalize", 0) != 0;
            layer.activation = parse_activation(r.get_str("activation", "linear"), sec.line);
            if (layer.filters == 0)
                fail(ErrorKind::parse, "filters must be positive at line " + std::to_string(sec.line));
            if (layer.size == 0 || layer.size % 2 == 0)
                fail(ErrorKind::parse, "kernel size must be odd at line " + std::to_string(sec.line));
            if (layer.stride == 0)
                fail(ErrorKind::parse, "stride must be positive at line " + std::to_string(sec.line));
        } else if (sec.name == "maxpool") {
            layer.kind = LayerKind::maxpool;
            layer.size = static_cast<uint32_t>(r.get_int("size", 2));
            layer.stride = static_cast<uint32_t>(r.get_int("stride", static_cast<long>(layer.size)));
            if (layer.size == 0 || layer.stride == 0)
                fail(ErrorKind::parse, "maxpool size/stride must be positive at line " +
                                           std::to_string(sec.line));
        } else if (sec.name == "upsample") {
            layer.kind = LayerKind::upsample;
            layer.factor = static_cast<uint32_t>(r.get_int("stride", 2));
            if (layer.factor == 0)
                fail(ErrorKind::parse, "upsample factor must be positive at line " +
                                           std::to_string(sec.line));
        } else if (sec.name == "route") {
            layer.kind = LayerKind::route;
            std::string spec_value = r.require_str("layers");
            for (const std::string& part : split_commas(spec_value))
                layer.route_layers.push_back(
                    resolve_reference(parse_long(part, "layers", sec.line), idx, sec.line));
            if (layer.route_layers.empty())
                fail(ErrorKind::parse, "route needs at least one source at line " +
                                           std::to_string(sec.line));
            layer.route_groups = static_cast<uint32_t>(r.get_int("groups", 1));
            layer.route_group_id = static_cast<uint32_t>(r.get_int("group_id", 0));
            if (layer.route_groups == 0 || layer.route_group_id >= layer.route_groups)
                fail(ErrorKind::parse, "route group_id must be < groups at line " +
                                           std::to_string(sec.line));
        } else if (sec.name == "shortcut") {
            layer.kind = LayerKind::shortcut;
            layer.from = resolve_reference(r.require_int("from"), idx, sec.line);
            layer.activation = parse_activation(r.get_str("activation", "linear"), sec.line);
        } else if (sec.name == "yolo") {
            layer.kind = LayerKind::yolo;
            std::vector<std::string> anchor_parts = split_commas(r.require_str("anchors"));
            if (anchor_parts.empty() || anchor_parts.size() % 2 != 0)
                fail(ErrorKind::parse, "anchors must list w,h pairs at line " + std::to_string(sec.line));
            for (size_t i = 0; i < anchor_parts.size(); i += 2)
                layer.anchors.emplace_back(parse_float(anchor_parts[i], "anchors", sec.line),
                                           parse_float(anchor_parts[i + 1], "anchors", sec.line));
            for (const std::string& part : split_commas(r.require_str("mask"))) {
                long m = parse_long(part, "mask", sec.line);
                if (m < 0 || m >= static_cast<long>(layer.anchors.size()))
                    fail(ErrorKind::parse, "mask index " + std::to_string(m) +
                                               " out of anchor range at line " + std::to_string(sec.line));
                layer.mask.push_back(static_cast<uint32_t>(m));
            }
            if (layer.mask.empty())
                fail(ErrorKind::parse, "yolo mask must be non-empty at line " + std::to_string(sec.line));
            layer.classes = static_cast<uint32_t>(r.require_int("classes"));
            if (layer.classes == 0)
                fail(ErrorKind::parse, "classes must be positive at line " + std::to_string(sec.line));
            layer.scale_xy = r.get_float("scale_x_y", 1.0f);
            if (r.has("num")) {
                long num = parse_long(sec.keys["num"].value, "num", sec.line);
                if (num != static_cast<long>(layer.anchors.size()) && warnings)
                    warnings->push_back("line " + std::to_string(sec.line) + ": num=" +
                                        std::to_string(num) + " disagrees with " +
                                        std::to_string(layer.anchors.size()) + " anchors");
            }
        } else {
            fail(ErrorKind::parse, "unknown layer kind [" + sec.name + "] at line " +
                                       std::to_string(sec.line));
        }

        r.collect_unknown(warnings);
        net.layers.push_back(std::move(layer));
    }

    if (net.layers.empty()) fail(ErrorKind::parse, "config defines no layers");

    bool has_yolo = false;
    for (const LayerSpec& l : net.layers) has_yolo |= l.kind == LayerKind::yolo;
    if (has_yolo && (net.input_width % 32 != 0 || net.input_height % 32 != 0))
        fail(ErrorKind::parse, "input width/height must be divisible by 32 for detection nets");

    return net;
}

NetworkDef parse_cfg_file(const std::string& path, std::vector<std::string>* warnings) {
    NetworkDef net = parse_cfg(read_file_text(path), warnings);
    size_t slash = path.find_last_of('/');
    net.source_name = slash == std::string::npos ? path : path.substr(slash + 1);
    return net;
}

std::string serialize_cfg(const NetworkDef& net) {
    if (net.layers.empty()) fail(ErrorKind::invalid, "refusing to serialize a network with no layers");
    std::string out;
    out += "[net]\n";
    out += "width=" + std::to_string(net.input_width) + "\n";
    out += "height=" + std::to_string(net.input_height) + "\n";
    out += "channels=" + std::to_string(net.input_channels) + "\n";

    for (const LayerSpec& l : net.layers) {
        out += "\n[";
        out += layer_kind_name(l.kind);
        out += "]\n";
        switch (l.kind) {
            case LayerKind::convolutional:
                if (l.batch_normalize) out += "batch_normalize=1\n";
                out += "filters=" + std::to_string(l.filters) + "\n";
                out += "size=" + std::to_string(l.size) + "\n";
                out += "stride=" + std::to_string(l.stride) + "\n";
                out += "pad=" + std::to_string(l.pad ? 1 : 0) + "\n";
                out += "activation=" + std::string(activation_name(l.activation)) + "\n";
                break;
            case LayerKind::maxpool:
                out += "size=" + std::to_string(l.size) + "\n";
                out += "stride=" + std::to_string(l.stride) + "\n";
                break;
            case LayerKind::upsample:
                out += "stride=" + std::to_string(l.factor) + "\n";
                break;
            case LayerKind::route: {
                out += "layers=";
                for (size_t i = 0; i < l.route_layers.size(); ++i) {
                    if (i) out += ",";
                    out += std::to_string(l.route_layers[i]);
                }
                out += "\n";
                if (l.route_groups > 1) {
                    out += "groups=" + std::to_string(l.route_groups) + "\n";
                    out += "group_id=" + std::to_string(l.route_group_id) + "\n";
                }
                break;
            }
            case LayerKind::shortcut:
                out += "from=" + std::to_string(l.from) + "\n";
                if (l.activation != Activation::linear)
                    out += "activation=" + std::string(activation_name(l.activation)) + "\n";
                break;
            case LayerKind::yolo: {
                out += "anchors=";
                for (size_t i = 0; i < l.anchors.size(); ++i) {
                    if (i) out += ",";
                    out += format_float(l.anchors[i].first) + "," + format_float(l.anchors[i].second);
                }
                out += "\nmask=";
                for (size_t i = 0; i < l.mask.size(); ++i) {
                    if (i) out += ",";
                    out += std::to_string(l.mask[i]);
                }
                out += "\n";
                out += "classes=" + std::to_string(l.classes) + "\n";
                if (l.scale_xy != 1.0f) out += "scale_x_y=" + format_float(l.scale_xy) + "\n";
                break;
            }
        }
    }
    return out;
}

std::vector<uint32_t> layer_out_channels(const NetworkDef& net) {
    std::vector<uint32_t> out(net.layers.size(), 0);
    auto channels_of = [&](int idx) { return idx < 0 ? net.input_channels : out[idx]; };

    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        int prev = static_cast<int>(i) - 1;
        switch (l.kind) {
            case LayerKind::convolutional:
                out[i] = l.filters;
                break;
            case LayerKind::maxpool:
            case LayerKind::upsample:
            case LayerKind::yolo:
                out[i] = channels_of(prev);
                break;
            case LayerKind::route: {
                uint32_t total = 0;
                for (int src : l.route_layers) {
                    uint32_t c = channels_of(src);
                    if (c % l.route_groups != 0)
                        fail(ErrorKind::invalid, "route at layer " + std::to_string(i) + ": source " +
                                                     std::to_string(src) + " channels " +
                                                     std::to_string(c) + " not divisible by groups " +
                                                     std::to_string(l.route_groups));
                    total += c / l.route_groups;
                }
                out[i] = total;
                break;
            }
            case LayerKind::shortcut:
                out[i] = channels_of(prev);
                break;
        }
    }
    return out;
}

uint32_t layer_in_channels(const NetworkDef& net, size_t i) {
    if (i == 0) return net.input_channels;
    return layer_out_channels(net)[i - 1];
}

namespace {

uint64_t conv_float_count(const NetworkDef& net, const std::vector<uint32_t>& channels, size_t i) {
    const LayerSpec& l = net.layers[i];
    uint64_t c = i == 0 ? net.input_channels : channels[i - 1];
    uint64_t kernel = static_cast<uint64_t>(l.filters) * c * l.size * l.size;
    uint64_t side = l.batch_normalize ? 4ull * l.filters : l.filters;
    return kernel + side;
}

}  // namespace

uint64_t weight_float_count(const NetworkDef& net) {
    std::vector<uint32_t> channels = layer_out_channels(net);
    uint64_t total = 0;
    for (size_t i = 0; i < net.layers.size(); ++i)
        if (net.layers[i].kind == LayerKind::convolutional) total += conv_float_count(net, channels, i);
    return total;
}

WeightStore load_weights(const std::vector<uint8_t>& bytes, const NetworkDef& net) {
    size_t pos = 0;
    if (bytes.size() < 12) fail(ErrorKind::weights, "bad header: file shorter than 12 bytes");
    WeightStore store;
    store.header.major = static_cast<int32_t>(get_u32le(bytes, pos));
    store.header.minor = static_cast<int32_t>(get_u32le(bytes, pos));
    store.header.revision = static_cast<int32_t>(get_u32le(bytes, pos));
    if (store.header.major < 0 || store.header.minor < 0 || store.header.revision < 0 ||
        store.header.major > 1000)
        fail(ErrorKind::weights, "bad header: implausible version " + std::to_string(store.header.major) +
                                     "." + std::to_string(store.header.minor) + "." +
                                     std::to_string(store.header.revision));
    bool wide_seen = store.header.major * 10 + store.header.minor >= 2;
    if (bytes.size() - pos < (wide_seen ? 8u : 4u))
        fail(ErrorKind::weights, "bad header: truncated seen counter");
    store.header.seen = wide_seen ? get_u64le(bytes, pos) : get_u32le(bytes, pos);

    uint64_t expected = weight_float_count(net);
    uint64_t actual = (bytes.size() - pos) / 4;
    if ((bytes.size() - pos) % 4 != 0 || actual != expected)
        fail(ErrorKind::weights, "size mismatch: definition needs " + std::to_string(expected) +
                                     " floats, file carries " + std::to_string(actual));

    std::vector<uint32_t> channels = layer_out_channels(net);
    store.blocks.resize(net.layers.size());
    auto take = [&](size_t n) {
        std::vector<float> v(n);
        for (size_t k = 0; k < n; ++k) v[k] = get_f32le(bytes, pos);
        return v;
    };

    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        if (l.kind != LayerKind::convolutional) continue;
        ConvWeights& w = store.blocks[i];
        uint64_t c = i == 0 ? net.input_channels : channels[i - 1];
        if (l.batch_normalize) {
            w.bn_beta = take(l.filters);
            w.bn_gamma = take(l.filters);
            w.bn_mean = take(l.filters);
            w.bn_var = take(l.filters);
            for (size_t k = 0; k < w.bn_var.size(); ++k)
                if (w.bn_var[k] < 0.0f)
                    fail(ErrorKind::weights, "layer " + std::to_string(i) + ": negative variance at channel " +
                                                 std::to_string(k));
        } else {
            w.bias = take(l.filters);
        }
        w.kernel = take(static_cast<size_t>(l.filters) * c * l.size * l.size);
    }
    return store;
}

WeightStore load_weights_file(const std::string& path, const NetworkDef& net) {
    return load_weights(read_file_bytes(path), net);
}

std::vector<uint8_t> save_weights(const WeightStore& store, const NetworkDef& net) {
    if (store.blocks.size() != net.layers.size())
        fail(ErrorKind::weights, "misaligned store: " + std::to_string(store.blocks.size()) +
                                     " blocks for " + std::to_string(net.layers.size()) + " layers");
    std::vector<uint8_t> bytes;
    put_u32le(bytes, static_cast<uint32_t>(store.header.major));
    put_u32le(bytes, static_cast<uint32_t>(store.header.minor));
    put_u32le(bytes, static_cast<uint32_t>(store.header.revision));
    if (store.header.major * 10 + store.header.minor >= 2)
        put_u64le(bytes, store.header.seen);
    else
        put_u32le(bytes, static_cast<uint32_t>(store.header.seen));

    std::vector<uint32_t> channels = layer_out_channels(net);
    auto emit = [&](const std::vector<float>& v, size_t want, size_t layer, const char* what) {
        if (v.size() != want)
            fail(ErrorKind::weights, "misaligned store: layer " + std::to_string(layer) + " " + what +
                                         " has " + std::to_string(v.size()) + " floats, needs " +
                                         std::to_string(want));
        for (float x : v) put_f32le(bytes, x);
    };

    for (size_t i = 0; i < net.layers.size(); ++i) {
        const LayerSpec& l = net.layers[i];
        const ConvWeights& w = store.blocks[i];
        if (l.kind != LayerKind::convolutional) {
            if (!w.kernel.empty() || !w.bias.empty() || !w.bn_gamma.empty())
                fail(ErrorKind::weights,
                     "misaligned store: non-conv layer " + std::to_string(i) + " carries weights");
            continue;
        }
        size_t c = i == 0 ? net.input_channels : channels[i - 1];
        if (l.batch_normalize) {
            emit(w.bn_beta, l.filters, i, "bn_beta");
            emit(w.bn_gamma, l.filters, i, "bn_gamma");
            emit(w.bn_mean, l.filters, i, "bn_mean");
            emit(w.bn_var, l.filters, i, "bn_var");
        } else {
            emit(w.bias, l.filters, i, "bias");
        }
        emit(w.kernel, static_cast<size_t>(l.filters) * c * l.size * l.size, i, "kernel");
    }
    return bytes;
}

void save_weights_file(const WeightStore& store, const NetworkDef& net, const std::string& path) {
    std::vector<uint8_t> bytes = save_weights(store, net);
    write_file_bytes(path, bytes.data(), bytes.size());
}

}  // namespace slimdet
