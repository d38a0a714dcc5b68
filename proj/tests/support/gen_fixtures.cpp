// Writes the bundled corpus fixture to data/fixtures/. The unit tests assert
// that the committed file matches this generator byte for byte.

#include <iostream>

#include "icl/dataset_io.hpp"
#include "support/table_fixture.hpp"

int main(int argc, char** argv) {
    std::string out = argc > 1 ? argv[1] : std::string(ICL_DATA_DIR) + "/fixtures/esg_train_fixture.jsonl";
    icl::Dataset ds = icl::testsupport::make_table_fixture();
    icl::save_jsonl(ds, out);
    std::cout << "wrote " << ds.articles.size() << " articles to " << out << "\n";
    return 0;
}
