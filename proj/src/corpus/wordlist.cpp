// Copyright 2026 The ttsel Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "ttsel/corpus.hpp"

namespace ttsel {

const std::vector<std::string>& default_word_list() {
  static const std::vector<std::string> kWords = {
      "THE",     "OF",      "AND",     "TO",      "IN",      "HE",      "WAS",     "THAT",
      "IT",      "HIS",     "HER",     "WITH",    "AS",      "HAD",     "FOR",     "YOU",
      "SHE",     "NOT",     "BUT",     "AT",      "ON",      "BE",      "HIM",     "THEY",
      "ALL",     "BY",      "SO",      "THIS",    "WERE",    "FROM",    "ONE",     "SAID",
      "THERE",   "WHICH",   "WHEN",    "WOULD",   "THEM",    "NO",      "WHAT",    "OUT",
      "UP",      "INTO",    "COULD",   "MAN",     "LITTLE",  "NOW",     "THEN",    "ABOUT",
      "TIME",    "MORE",    "VERY",    "OVER",    "UPON",    "LIKE",    "GREAT",   "OLD",
      "BEFORE",  "AGAIN",   "KNOW",    "LONG",    "GOOD",    "CAME",    "DOWN",    "DAY",
      "MADE",    "AWAY",    "HAND",    "EYES",    "MIGHT",   "NEVER",   "HOUSE",   "THOUGHT",
      "WAY",     "YOUNG",   "WATER",   "HEAD",    "LIFE",    "NIGHT",   "WORLD",   "HEART",
      "FATHER",  "MOTHER",  "DOOR",    "ROOM",    "FACE",    "LIGHT",   "VOICE",   "MORNING",
      "WOMAN",   "CHILD",   "FRIEND",  "PLACE",   "WORK",    "WORD",    "LOOK",    "SEEMED",
      "LEFT",    "RIGHT",   "SMALL",   "HOME",    "TOWN",    "ROAD",    "RIVER",   "TREE",
      "GARDEN",  "WINDOW",  "TABLE",   "FIRE",    "BOOK",    "LETTER",  "HORSE",   "DOG",
      "CAT",     "BIRD",    "SHIP",    "SEA",     "SKY",     "SUN",     "MOON",    "STAR",
      "WIND",    "RAIN",    "SNOW",    "STONE",   "FIELD",   "HILL",    "FOREST",  "CITY",
      "KING",    "QUEEN",   "LORD",    "LADY",    "SOLDIER", "DOCTOR",  "CAPTAIN", "MASTER",
      "SERVANT", "BROTHER", "SISTER",  "COUNTRY", "MONEY",   "GOLD",    "SILVER",  "BREAD",
      "WINE",    "DINNER",  "SUPPER",  "EVENING", "SUMMER",  "WINTER",  "SPRING",  "AUTUMN",
      "RED",     "WHITE",   "BLACK",   "GREEN",   "BLUE",    "DARK",    "BRIGHT",  "COLD",
      "WARM",    "QUIET",   "STRANGE", "HAPPY",   "SAD",     "TRUE",    "FREE",    "STRONG",
      "SLOW",    "QUICK",   "HIGH",    "DEEP",    "OPEN",    "CLOSE",   "WALK",    "SPEAK",
      "HEAR",    "SEE",     "TAKE",    "GIVE",    "COME",    "GO",      "FIND",    "TELL",
      "ASK",     "FEEL",    "LEAVE",   "CALL",    "KEEP",    "BRING",   "BEGIN",   "SEEM",
      "HELP",    "TURN",    "START",   "SHOW",    "HOLD",    "STAND",   "WRITE",   "READ",
  };
  return kWords;
}

}  // namespace ttsel
