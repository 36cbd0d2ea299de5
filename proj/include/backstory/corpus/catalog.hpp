#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <string_view>

namespace backstory::corpus {

struct EventType {
  std::string_view name;
  std::array<std::string_view, 20> objects;
};

// The ten event types used as generation attributes, each with its
// published sample of object strings.
inline constexpr std::array<EventType, 10> kEventCatalog = {{
    {"Social Gathering",
     {"chairs", "tables", "food platters", "drinks", "napkins", "decorations",
      "music speakers", "games", "invitation cards", "host", "guests",
      "tablecloths", "candles", "balloons", "party favors", "photo booth",
      "name tags", "cutlery", "glasses", "ice bucket"}},
    {"Educational Activity",
     {"textbooks", "notebooks", "pencils", "whiteboard", "markers",
      "projector", "handouts", "calculator", "overhead projector", "globe",
      "poster board", "computer", "scissors", "gluestick", "craft supplies",
      "timers", "textual resources", "reference books", "tables",
      "student desks"}},
    {"Recreational and Nature Activity",
     {"hiking boots", "backpacks", "water bottles", "first-aid kit",
      "campfire supplies", "nature guide", "binoculars", "tent",
      "sleeping bags", "camping chairs", "fishing gear", "bicycles", "kayaks",
      "picnic basket", "coolers", "maps", "sunscreen", "bug spray",
      "fishing rods", "swimming gear"}},
    {"Cultural and Community Event",
     {"stage", "performers", "sound system", "projector", "festival tickets",
      "food stalls", "craft booths", "cultural displays", "artworks",
      "costumes", "brochures", "community posters", "instruments", "banners",
      "seating areas", "local products", "vendors", "volunteers",
      "refreshments", "cultural symbols"}},
    {"Professional Development",
     {"business cards", "presentation slides", "notebooks", "pens",
      "projector", "handouts", "networking tools", "feedback forms",
      "laptops", "name badges", "workshops", "career fair flyers",
      "industry reports", "coffee cups", "panel discussion guides",
      "training materials", "lecture notes", "team-building activities",
      "case studies", "clipboards"}},
    {"Celebration",
     {"cake", "candles", "party hats", "balloons", "confetti", "party favors",
      "streamers", "drinks", "gift bags", "music playlist", "photo booth",
      "decorations", "invitation cards", "celebration banner", "tables",
      "chairs", "food platters", "glasses", "plates", "silverware"}},
    {"Artistic Performance",
     {"stage", "costumes", "sets", "props", "lights", "sound equipment",
      "musical instruments", "audience seats", "backdrops", "tickets",
      "makeup kit", "rehearsal schedule", "choreography notes",
      "great hits collection", "piano", "amplifiers", "performance schedule",
      "music sheets", "playbill", "actors"}},
    {"Competition",
     {"trophies", "medals", "referee kit", "scoreboard", "team jerseys",
      "game equipment", "whistle", "competition schedule", "event tickets",
      "player registration", "crowd barriers", "timing devices", "venue maps",
      "registration forms", "team banners", "score sheets", "first aid kits",
      "video cameras", "performance analytics", "heat sheets"}},
    {"Family and Relationships",
     {"family photo albums", "toys", "family tree chart", "gift cards",
      "family recipe book", "family calendars", "cameraman",
      "outdoor equipment", "gifts", "personalized items",
      "family game night materials", "storybooks", "name tags",
      "family bonding games", "sentimental objects", "blankets",
      "picnic spreads", "board games", "interactive toys", "family outings"}},
    {"Transportation and Travel Event",
     {"maps", "itineraries", "backpacks", "suitcases", "boarding passes",
      "tickets", "travel guides", "snacks", "passports", "travel pillows",
      "sunscreen", "water bottles", "portable chargers", "cameras",
      "compact umbrellas", "guidebooks", "tour buses", "airport shuttles",
      "magazine subscriptions", "reservation forms"}},
}};

inline const EventType* find_event_type(std::string_view name) noexcept {
  auto it = std::find_if(kEventCatalog.begin(), kEventCatalog.end(),
                         [&](const EventType& t) { return t.name == name; });
  return it == kEventCatalog.end() ? nullptr : &*it;
}

inline bool is_catalog_type(std::string_view name) noexcept {
  return find_event_type(name) != nullptr;
}

}  // namespace backstory::corpus
