#ifndef DRS_HASH_HPP
#define DRS_HASH_HPP

#include <string>
#include <string_view>

namespace drs {

std::string sha1_hex(std::string_view data);

/// Git blob object id: sha1("blob <size>\0" + content).
std::string git_blob_hash(std::string_view content);

}  // namespace drs

#endif  // DRS_HASH_HPP
