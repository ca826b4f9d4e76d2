//! Templated assistant-style queries over the bundled toy lexicon.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::lexicon::Utterance;

const TEMPLATES: &[&str] = &[
    "call {name}",
    "call {relation} {name}",
    "call my {relation}",
    "text {name}",
    "text {relation} {name}",
    "send a message to {name}",
    "send a message to {relation} {name}",
    "play {genre}",
    "play some {genre} music",
    "play {genre} in the {room}",
    "play {genre} music in the {room}",
    "play happy birthday for {name}",
    "navigate to {place}",
    "directions to {place}",
    "what is the weather in {city}",
    "what is the weather in {city} {day}",
    "how far is {city}",
    "set a timer for {number} minutes",
    "set an alarm for {number}",
    "set an alarm for {number} {day}",
    "remind me to {task} {day}",
    "remind me to call {name} {day}",
    "add {item} to my shopping list",
    "add {item} and {item} to my list",
    "buy {item}",
    "turn on the lights in the {room}",
    "turn off the {device}",
    "turn on the {device} in the {room}",
    "open {app}",
];

const NAMES: &[&str] = &[
    "levar", "nadia", "carol", "karen", "sean", "ken", "kevin", "ben", "dan", "ann", "anna", "ellen", "allen", "mark",
    "mike", "matt", "pat", "peter", "paul", "nora", "laura", "dora", "sara", "jane", "jean", "gene", "joan", "john",
    "ron", "rob", "bob", "tom", "tim", "jim", "kim", "sam", "pam", "rose", "ross", "ray", "kate", "kay", "jay", "lee",
    "leo", "lisa", "maria", "mario", "marco", "nick", "rick", "eric", "erica", "derek", "omar", "amir", "tara", "tia",
    "dina", "nina", "ivan", "evan", "owen", "ian", "noah", "zoe", "chloe", "jack", "jake", "luke", "lucas", "mia", "max",
];
const RELATIONS: &[&str] =
    &["uncle", "aunt", "cousin", "brother", "sister", "mom", "dad", "grandma", "grandpa", "boss", "wife", "husband", "friend"];
const GENRES: &[&str] =
    &["jazz", "rock", "pop", "blues", "country", "classical", "metal", "folk", "soul", "reggae", "rap", "funk", "disco", "techno"];
const ROOMS: &[&str] = &["kitchen", "bedroom", "living room", "office", "garage", "bathroom", "hallway"];
const CITIES: &[&str] = &[
    "boston", "austin", "dallas", "denver", "seattle", "portland", "chicago", "phoenix", "houston", "miami", "atlanta",
    "paris", "london", "berlin", "tokyo", "dublin", "toronto", "madrid", "milan", "rome",
];
const OTHER_PLACES: &[&str] = &["home", "work", "school", "the airport", "the station", "the park", "the bank"];
const DAYS: &[&str] =
    &["today", "tonight", "tomorrow", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday"];
const NUMBERS: &[&str] = &[
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve", "fifteen",
    "twenty", "thirty", "forty", "fifty",
];
const TASKS: &[&str] = &[
    "feed the dog", "walk the dog", "feed the cat", "pay rent", "water the plants", "take out the trash",
    "pick up the kids", "call the dentist", "call the doctor", "buy milk",
];
const ITEMS: &[&str] = &[
    "milk", "eggs", "bread", "butter", "cheese", "apples", "bananas", "rice", "beans", "coffee", "tea", "sugar", "flour",
    "pasta", "soap", "chicken",
];
const DEVICES: &[&str] = &["fan", "heater", "oven", "tv", "lights"];
const APPS: &[&str] = &["maps", "mail", "photos", "camera", "calendar", "notes", "settings", "clock", "news", "music", "radio"];

fn fill(slot: &str, rng: &mut impl Rng) -> String {
    let pick = |list: &[&str], rng: &mut _| list.choose(rng).expect("non-empty slot list").to_string();
    match slot {
        "name" => pick(NAMES, rng),
        "relation" => pick(RELATIONS, rng),
        "genre" => pick(GENRES, rng),
        "room" => pick(ROOMS, rng),
        "city" => pick(CITIES, rng),
        "place" => {
            if rng.gen_bool(0.5) {
                pick(CITIES, rng)
            } else {
                pick(OTHER_PLACES, rng)
            }
        }
        "day" => pick(DAYS, rng),
        "number" => pick(NUMBERS, rng),
        "task" => pick(TASKS, rng),
        "item" => pick(ITEMS, rng),
        "device" => pick(DEVICES, rng),
        "app" => pick(APPS, rng),
        other => panic!("unknown template slot {other}"),
    }
}

/// Expands one template with random slot fillers.
pub fn expand(template: &str, rng: &mut impl Rng) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..].find('}').expect("balanced braces") + open;
        out.push_str(&rest[..open]);
        out.push_str(&fill(&rest[open + 1..close], rng));
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

/// `n` reference queries: a uniformly chosen template, then uniformly
/// chosen slot fillers. Every word is in the toy lexicon.
pub fn generate_references(n: usize, seed: u64) -> Vec<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = TEMPLATES.choose(&mut rng).expect("templates");
            Utterance::parse(&expand(t, &mut rng)).expect("templates produce valid utterances")
        })
        .collect()
}

/// Reads one reference per line, skipping blank lines and `#` comments.
pub fn read_references(text: &str) -> Result<Vec<Utterance>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(Utterance::parse)
        .collect()
}
