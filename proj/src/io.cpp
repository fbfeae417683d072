#include "flexdecode/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace flexdecode::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_big(T v) {
    if constexpr (std::endian::native == std::endian::big) {
        unsigned char b[sizeof(T)];
        std::memcpy(b, &v, sizeof(T));
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
        std::memcpy(&v, b, sizeof(T));
    }
    return v;
}

template <typename T>
void put(std::ostream& os, T v) {
    v = byteswap_if_big(v);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const fs::path& path) {
    T v;
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) {
        throw ParseError(path.string() + ": truncated header");
    }
    return byteswap_if_big(v);
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream os(path, mode | std::ios::trunc);
    if (!os) throw ValidationError("cannot write " + path.string());
    return os;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream is(path, mode);
    if (!is) throw ValidationError("cannot open " + path.string());
    return is;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep)) out.push_back(trim(cell));
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const fs::path& path, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + s + "'");
    }
}

Index parse_index(const std::string& s, const fs::path& path, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<Index>(v);
    } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": not an integer: '" + s + "'");
    }
}

json index_vector(const std::vector<Index>& v) {
    json a = json::array();
    for (Index i : v) a.push_back(static_cast<long long>(i));
    return a;
}

std::vector<Index> index_vector(const json& j) {
    std::vector<Index> v;
    for (const auto& x : j) v.push_back(static_cast<Index>(x.get<long long>()));
    return v;
}

json flex_model_to_json(const FlexStateModel& m) {
    return {{"H", matrix_to_json(m.H)}, {"feature_index_set", index_vector(m.feature_index_set)}, {"lambda", m.lambda}};
}

FlexStateModel flex_model_from_json(const json& j) {
    FlexStateModel m;
    m.H = matrix_from_json(j.at("H"));
    m.feature_index_set = index_vector(j.at("feature_index_set"));
    m.lambda = j.at("lambda").get<double>();
    return m;
}

const char* direction_name(DelayDirection d) {
    return d == DelayDirection::EcogLeads ? "ecog_leads" : "ecog_lags";
}

DelayDirection direction_from_name(const std::string& s) {
    if (s == "ecog_leads") return DelayDirection::EcogLeads;
    if (s == "ecog_lags") return DelayDirection::EcogLags;
    throw ParseError("unknown delay direction '" + s + "'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Signals
// ---------------------------------------------------------------------------

MultichannelSignal read_signal(const fs::path& path) {
    if (path.extension() == ".csv") return read_signal_csv(path);
    std::ifstream is = open_in(path, std::ios::binary);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kSignalMagic, 4) != 0) {
        throw ParseError(path.string() + ": not a signal file (bad magic)");
    }
    const auto version = get<std::uint32_t>(is, path);
    if (version != kSignalVersion) {
        throw ParseError(path.string() + ": unsupported signal format version " + std::to_string(version));
    }
    const auto n = get<std::uint64_t>(is, path);
    const auto c = get<std::uint32_t>(is, path);
    const auto rate = get<double>(is, path);
    if (c == 0 || n == 0) throw ParseError(path.string() + ": empty signal");
    std::vector<std::string> ids(c);
    for (auto& id : ids) {
        const auto len = get<std::uint16_t>(is, path);
        id.resize(len);
        if (len > 0 && !is.read(id.data(), len)) throw ParseError(path.string() + ": truncated channel ids");
    }
    const auto count = static_cast<std::size_t>(n) * c;
    std::vector<float> buf(count);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(count * sizeof(float)))) {
        throw ParseError(path.string() + ": truncated sample data");
    }
    if (is.peek() != std::char_traits<char>::eof()) throw ParseError(path.string() + ": trailing bytes");
    Matrix m(static_cast<Index>(n), static_cast<Index>(c));
    for (std::size_t t = 0; t < n; ++t) {
        for (std::size_t j = 0; j < c; ++j) {
            m(static_cast<Index>(t), static_cast<Index>(j)) = byteswap_if_big(buf[t * c + j]);
        }
    }
    return MultichannelSignal(std::move(m), rate, std::move(ids));
}

void write_signal(const fs::path& path, const MultichannelSignal& sig) {
    if (path.extension() == ".csv") return write_signal_csv(path, sig);
    std::ofstream os = open_out(path, std::ios::out | std::ios::binary);
    os.write(kSignalMagic, 4);
    put<std::uint32_t>(os, kSignalVersion);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(sig.n_samples()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(sig.n_channels()));
    put<double>(os, sig.rate_hz());
    for (const auto& id : sig.channel_ids()) {
        if (id.size() > 0xffff) throw ValidationError("channel id too long");
        put<std::uint16_t>(os, static_cast<std::uint16_t>(id.size()));
        os.write(id.data(), static_cast<std::streamsize>(id.size()));
    }
    const Matrix& m = sig.samples();
    std::vector<float> buf(static_cast<std::size_t>(m.size()));
    std::size_t k = 0;
    for (Index t = 0; t < m.rows(); ++t) {
        for (Index j = 0; j < m.cols(); ++j) buf[k++] = byteswap_if_big(static_cast<float>(m(t, j)));
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!os) throw ValidationError("write failed: " + path.string());
}

FlexionRecord read_flexion(const fs::path& path) {
    MultichannelSignal sig = read_signal(path);
    if (sig.n_channels() != kNumFingers) {
        throw ValidationError(path.string() + ": flexion file must have 5 channels, found " +
                              std::to_string(sig.n_channels()));
    }
    return FlexionRecord(sig.samples(), sig.rate_hz());
}

void write_flexion(const fs::path& path, const FlexionRecord& flex) {
    write_signal(path, MultichannelSignal(flex.flexion(), flex.rate_hz(), {"f1", "f2", "f3", "f4", "f5"}));
}

MultichannelSignal read_signal_csv(const fs::path& path) {
    std::ifstream is = open_in(path);
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(is, line)) throw ParseError(path.string() + ": empty file");
    line = trim(line);
    const std::string key = "# rate_hz=";
    if (line.rfind(key, 0) != 0) throw ParseError(path.string() + ":1: expected '# rate_hz=<rate>'");
    const double rate = parse_double(trim(line.substr(key.size())), path, line_no);
    ++line_no;
    if (!std::getline(is, line)) throw ParseError(path.string() + ": missing header line");
    std::vector<std::string> ids = split(trim(line), ',');
    std::vector<double> values;
    Index rows = 0;
    while (std::getline(is, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty()) continue;
        const auto cells = split(line, ',');
        if (cells.size() != ids.size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(ids.size()) + " columns, found " + std::to_string(cells.size()));
        }
        for (const auto& c : cells) values.push_back(parse_double(c, path, line_no));
        ++rows;
    }
    if (rows == 0) throw ParseError(path.string() + ": no samples");
    const auto cols = static_cast<Index>(ids.size());
    Matrix m(rows, cols);
    for (Index t = 0; t < rows; ++t) {
        for (Index j = 0; j < cols; ++j) m(t, j) = values[static_cast<std::size_t>(t * cols + j)];
    }
    return MultichannelSignal(std::move(m), rate, std::move(ids));
}

void write_signal_csv(const fs::path& path, const MultichannelSignal& sig) {
    std::ofstream os = open_out(path);
    os << "# rate_hz=" << fmt_double(sig.rate_hz()) << '\n';
    const auto& ids = sig.channel_ids();
    for (std::size_t j = 0; j < ids.size(); ++j) {
        if (ids[j].find(',') != std::string::npos) throw ValidationError("channel id contains a comma: " + ids[j]);
        os << (j ? "," : "") << ids[j];
    }
    os << '\n';
    const Matrix& m = sig.samples();
    for (Index t = 0; t < m.rows(); ++t) {
        for (Index j = 0; j < m.cols(); ++j) os << (j ? "," : "") << fmt_double(m(t, j));
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Segments and predictions
// ---------------------------------------------------------------------------

SegmentList read_segments(const fs::path& path, Index n_samples) {
    return SegmentList(read_segment_entries(path), n_samples);
}

std::vector<Segment> read_segment_entries(const fs::path& path) {
    std::ifstream is = open_in(path);
    std::vector<Segment> segs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream ss(line);
        std::vector<std::string> tok;
        for (std::string w; ss >> w;) tok.push_back(w);
        if (tok.empty()) continue;
        if (tok.size() != 3) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 'start end state'");
        }
        segs.push_back({parse_index(tok[0], path, line_no), parse_index(tok[1], path, line_no),
                        static_cast<int>(parse_index(tok[2], path, line_no))});
    }
    return segs;
}

void write_segments(const fs::path& path, const SegmentList& segs) {
    std::ofstream os = open_out(path);
    os << "# start end state (n_samples=" << segs.n_samples() << ")\n";
    for (const auto& s : segs.segments()) os << s.start << ' ' << s.end << ' ' << s.state << '\n';
}

void write_predictions(const fs::path& path, const DecodeResult& result, double rate_hz) {
    const Index n = result.flexion_hat.rows();
    Matrix m(n, kNumFingers + 1);
    m.leftCols(kNumFingers) = result.flexion_hat;
    for (Index t = 0; t < n; ++t) m(t, kNumFingers) = result.states_hat[t];
    write_signal(path, MultichannelSignal(std::move(m), rate_hz, {"f1", "f2", "f3", "f4", "f5", "state"}));
}

FlexionRecord read_predictions(const fs::path& path) {
    MultichannelSignal sig = read_signal(path);
    if (sig.n_channels() < kNumFingers) {
        throw ValidationError(path.string() + ": need at least 5 columns, found " + std::to_string(sig.n_channels()));
    }
    return FlexionRecord(sig.samples().leftCols(kNumFingers), sig.rate_hz());
}

// ---------------------------------------------------------------------------
// Decoder archive
// ---------------------------------------------------------------------------

json matrix_to_json(const Matrix& m) {
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    }
    return {{"rows", static_cast<long long>(m.rows())}, {"cols", static_cast<long long>(m.cols())}, {"data", data}};
}

Matrix matrix_from_json(const json& j) {
    const auto rows = static_cast<Index>(j.at("rows").get<long long>());
    const auto cols = static_cast<Index>(j.at("cols").get<long long>());
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
        throw ParseError("matrix payload does not match its shape");
    }
    Matrix m(rows, cols);
    std::size_t k = 0;
    for (Index i = 0; i < rows; ++i) {
        for (Index jj = 0; jj < cols; ++jj) m(i, jj) = data[k++].get<double>();
    }
    return m;
}

json decoder_to_json(const TrainedDecoder& dec) {
    const auto& p = dec.preprocessing;
    json pre = {
        {"delay_ms", p.delay_ms},
        {"delay_direction", direction_name(p.delay_direction)},
        {"downsample_factor", p.downsample_factor},
        {"raw_rate_hz", p.raw_rate_hz},
        {"working_rate_hz", p.working_rate_hz},
        {"channel_ids", p.channel_ids},
        {"state_features",
         {{"window_len", p.state_features.window_len},
          {"ar_order", p.state_features.ar_order},
          {"n_ar_used", p.state_features.n_ar_used},
          {"shift_ts", p.state_features.shift_ts}}},
        {"flex_features",
         {{"sg_order", p.flex_features.sg_order},
          {"sg_width_s", p.flex_features.sg_width_s},
          {"shift_tau", p.flex_features.shift_tau}}},
    };
    const auto& sm = dec.state_model;
    json state = {
        {"C", matrix_to_json(sm.C)},
        {"selected_channels", sm.selected_channels},
        {"feature_names", sm.feature_names},
        {"shift_ts", sm.shift_ts},
        {"active_rows", index_vector(sm.active_rows)},
        {"degenerate", sm.degenerate},
    };
    json models = json::array();
    for (const auto& m : dec.flex_bank.models) models.push_back(flex_model_to_json(m));
    json j = {
        {"format", "flexdecode-decoder"},
        {"version", kArchiveVersion},
        {"preprocessing", pre},
        {"state_model", state},
        {"flex_bank", {{"shift_tau", dec.flex_bank.shift_tau}, {"models", models}}},
        {"hyperparameters", dec.hyperparameters},
    };
    j["global_model"] = dec.global_model ? flex_model_to_json(*dec.global_model) : json(nullptr);
    return j;
}

TrainedDecoder decoder_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "flexdecode-decoder") throw ParseError("not a decoder archive");
        const int version = j.at("version").get<int>();
        if (version != kArchiveVersion) {
            throw ParseError("unsupported decoder archive version " + std::to_string(version));
        }
        TrainedDecoder dec;
        const auto& pre = j.at("preprocessing");
        auto& p = dec.preprocessing;
        p.delay_ms = pre.at("delay_ms").get<double>();
        p.delay_direction = direction_from_name(pre.at("delay_direction").get<std::string>());
        p.downsample_factor = pre.at("downsample_factor").get<int>();
        p.raw_rate_hz = pre.at("raw_rate_hz").get<double>();
        p.working_rate_hz = pre.at("working_rate_hz").get<double>();
        p.channel_ids = pre.at("channel_ids").get<std::vector<std::string>>();
        const auto& sf = pre.at("state_features");
        p.state_features.window_len = sf.at("window_len").get<Index>();
        p.state_features.ar_order = sf.at("ar_order").get<int>();
        p.state_features.n_ar_used = sf.at("n_ar_used").get<int>();
        p.state_features.shift_ts = sf.at("shift_ts").get<int>();
        const auto& ff = pre.at("flex_features");
        p.flex_features.sg_order = ff.at("sg_order").get<int>();
        p.flex_features.sg_width_s = ff.at("sg_width_s").get<double>();
        p.flex_features.shift_tau = ff.at("shift_tau").get<int>();

        const auto& st = j.at("state_model");
        auto& sm = dec.state_model;
        sm.C = matrix_from_json(st.at("C"));
        sm.selected_channels = st.at("selected_channels").get<std::vector<std::string>>();
        sm.feature_names = st.at("feature_names").get<std::vector<std::string>>();
        sm.shift_ts = st.at("shift_ts").get<int>();
        sm.active_rows = index_vector(st.at("active_rows"));
        sm.degenerate = st.at("degenerate").get<bool>();
        sm.validate();

        const auto& bank = j.at("flex_bank");
        dec.flex_bank.shift_tau = bank.at("shift_tau").get<int>();
        const auto& models = bank.at("models");
        if (models.size() != static_cast<std::size_t>(kNumStates)) throw ParseError("decoder archive needs 6 flex models");
        for (std::size_t k = 0; k < models.size(); ++k) dec.flex_bank.models[k] = flex_model_from_json(models[k]);
        if (!j.at("global_model").is_null()) dec.global_model = flex_model_from_json(j.at("global_model"));
        dec.hyperparameters = j.at("hyperparameters").get<std::map<std::string, double>>();
        return dec;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed decoder archive: ") + e.what());
    }
}

void save_decoder(const fs::path& path, const TrainedDecoder& dec, const json& report) {
    json j = decoder_to_json(dec);
    if (!report.is_null()) j["report"] = report;
    write_text(path, j.dump(1) + "\n");
}

TrainedDecoder load_decoder(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return decoder_from_json(j);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream os = open_out(path, std::ios::out | std::ios::binary);
    os << text;
    if (!os) throw ValidationError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream is = open_in(path, std::ios::in | std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace flexdecode::io
