#include "fairkit/registry.hpp"

#include <algorithm>
#include <cctype>

#include "fairkit/error.hpp"

namespace fairkit {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

const std::vector<DatasetInfo>& dataset_registry() {
  static const std::vector<DatasetInfo> rows = {
      {"xAPI Students Performance", "amrieh2015students", "480", "16",
       {"Gender", "Nationality", "Native-Country"}, {"MC"}, {"xapi"}},
      {"NLSY", "bureau2019national", "~10K", "", {"Birth-date", "Ethnicity", "Gender"},
       {"BC", "MC", "R"}, {}},
      {"Wine Quality", "cortez2009wine", "4898", "13", {"Color"}, {"MC", "R"}, {"wine"}},
      {"Students Performance", "cortez2014student", "649", "33", {"Age", "Gender"}, {"R"},
       {"student"}},
      {"Drug Consumption", "fehrman2016drug", "1885", "32", {"Age", "Ethnicity", "Gender", "Country"},
       {"MC"}, {"drug"}},
      {"School Effectiveness", "goldstein1987school", "15362", "9", {"Ethnicity", "Gender"}, {"R"},
       {"school"}},
      {"Arrhythmia", "guvenir1998arrhythmia", "452", "279", {"Age", "Gender"}, {"MC"}, {}},
      {"MovieLens", "harper2016movielens", "100K", "~20", {"Age", "Gender"}, {"R"}, {}},
      {"Heritage Health", "heritage2011heritage", "~60K", "~20", {"Age", "Gender"}, {"MC", "R"},
       {"heritage"}},
      {"German Credit", "hofmann1994statlog", "1K", "20", {"Age", "Gender/Marital-Stat"}, {"MC"},
       {"german"}},
      {"Student Academics Performance", "hussain2018student", "300", "22", {"Gender"}, {"MC"}, {}},
      {"Heart Disease", "janosi1988heart", "303", "75", {"Age", "Gender"}, {"MC", "R"}, {"heart"}},
      {"Census/Adult Income", "kohavi1996census", "48842", "14",
       {"Age", "Ethnicity", "Gender", "Native-Country"}, {"BC"}, {"adult", "census"}},
      {"COMPAS", "larson2016propublica", "11758", "36", {"Age", "Ethnicity", "Gender"}, {"BC", "MC"},
       {}},
      {"Contraceptive Method Choice", "lim1997contraceptive", "1473", "9", {"Age", "Religion"}, {"MC"},
       {"contraceptive"}},
      {"CelebA Faces", "liu2015celeba", "~200K", "40", {"Gender Skin-Paleness", "Youth"}, {"BC"},
       {"celeba"}},
      {"Chicago Faces", "ma2015chicago", "597", "5", {"Ethnicity", "Gender"}, {"MC"}, {"chicago"}},
      {"Diversity in Faces", "merler2019diversity", "1 M", "47", {"Age", "Gender"}, {"MC", "R"},
       {"dif"}},
      {"Bank Marketing", "moro2014bank", "45211", "17-20", {"Age"}, {"BC"}, {"bank"}},
      {"Stop, Question & Frisk", "new2012stop", "84868", "~100", {"Age", "Ethnicity", "Gender"},
       {"BC", "MC"}, {"sqf", "frisk"}},
      {"Communities & crime", "redmond2009communities", "1994", "128", {"Ethnicity"}, {"R"},
       {"communities", "crime"}},
      {"Diabetes US", "strack2014diabetes", "101768", "55", {"Age", "Ethnicity"}, {"BC", "MC"},
       {"diabetes"}},
      {"Law School Admission", "wightman1998law", "21792", "5", {"Ethnicity", "Gender"}, {"R"},
       {"law", "lsac"}},
      {"Credit Card Default", "yeh2016default", "30K", "24", {"Age", "Gender"}, {"BC"},
       {"credit", "default"}},
  };
  return rows;
}

const DatasetInfo& find_dataset(std::string_view name) {
  const std::string key = lower(name);
  for (const auto& row : dataset_registry()) {
    if (lower(row.name) == key) return row;
    for (const auto& alias : row.aliases) {
      if (alias == key) return row;
    }
  }
  throw DataError("unknown dataset '" + std::string(name) + "'; see `datasets list`");
}

}  // namespace fairkit
