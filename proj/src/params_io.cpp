#include "microclust/params_io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "microclust/partition_io.hpp"

namespace microclust {

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc())
    throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, ptr);
}

double parse_number(std::string_view text) {
  double v = 0.0;
  const char *first = text.data();
  const char *last = text.data() + text.size();
  if (first != last && *first == '+')
    ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  return v;
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '#') {
      while (i < text.size() && text[i] != '\n')
        ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t' && text[j] != '\r' && text[j] != '\n')
      ++j;
    const std::string_view token = text.substr(i, j - i);
    const auto eq = token.find('=');
    if (eq == std::string_view::npos || eq == 0 || eq + 1 == token.size())
      throw ParseError("expected key=value, got '" + std::string(token) + "'", line);
    kv.insert_or_assign(std::string(token.substr(0, eq)), std::string(token.substr(eq + 1)));
    i = j;
  }
  return kv;
}

KeyValues read_key_values(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_key_values(ss.str());
  } catch (const ParseError &e) {
    throw ParseError(path + ": " + e.what(), 0);
  }
}

std::string format_params(const ModelParams &params) {
  std::ostringstream out;
  std::visit(
      [&](const auto &m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, NBNBParams>)
          out << "model=nbnb a=" << format_number(m.a) << " q=" << format_number(m.q)
              << " r=" << format_number(m.r) << " p=" << format_number(m.p);
        else if constexpr (std::is_same_v<T, PERPSParams>)
          out << "model=perps alpha=" << format_number(m.alpha) << " lambda=" << format_number(m.lambda);
        else if constexpr (std::is_same_v<T, DPParams>)
          out << "model=dp theta=" << format_number(m.theta);
        else if constexpr (std::is_same_v<T, PYPParams>)
          out << "model=pyp theta=" << format_number(m.theta) << " delta=" << format_number(m.delta);
        else
          out << "model=mfm gamma=" << format_number(m.gamma) << " k_prior=" << m.k_prior.to_string();
      },
      params);
  return out.str();
}

ModelParams params_from_key_values(const KeyValues &kv) {
  auto it = kv.find("model");
  if (it == kv.end())
    throw std::invalid_argument("parameters: missing model=<name>");
  const ModelKind kind = parse_model_kind(it->second);

  std::set<std::string, std::less<>> used{"model"};
  auto get = [&](const char *key) {
    auto f = kv.find(key);
    if (f == kv.end())
      throw std::invalid_argument(std::string("parameters for ") + std::string(model_name(kind)) +
                                  ": missing " + key + "=<value>");
    used.insert(key);
    return parse_number(f->second);
  };

  ModelParams out;
  switch (kind) {
  case ModelKind::nbnb:
    out = NBNBParams{get("a"), get("q"), get("r"), get("p")};
    break;
  case ModelKind::perps:
    out = PERPSParams{get("alpha"), get("lambda")};
    break;
  case ModelKind::dp:
    out = DPParams{get("theta")};
    break;
  case ModelKind::pyp:
    out = PYPParams{get("theta"), get("delta")};
    break;
  case ModelKind::mfm: {
    MFMParams m;
    m.gamma = get("gamma");
    if (auto f = kv.find("k_prior"); f != kv.end()) {
      m.k_prior = KPrior::parse(f->second);
      used.insert("k_prior");
    }
    out = m;
    break;
  }
  }
  for (const auto &[key, value] : kv)
    if (!used.count(key))
      throw std::invalid_argument("parameters for " + std::string(model_name(kind)) + ": unknown key '" + key + "'");
  validate(out);
  return out;
}

ModelParams parse_params(std::string_view text) { return params_from_key_values(parse_key_values(text)); }

} // namespace microclust
