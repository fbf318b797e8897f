import pytest

from retroparse.corpus import corpus_from_rows
from retroparse.embedding import HashedEmbedder
from retroparse.vindex import build_index

# Reference frame strings; their irregular bracket spacing is kept on purpose.
OVEN_TIMER = ("[in:add_time_timer add [sl:date_time ten minutes ] to the "
              "[sl:timer_name oven]  [sl:method_timer timer ] ]")
OVEN_TIMER_UTT = "add ten minutes to the oven timer"
LASAGNA_UTT = "please add 20 minutes on the lasagna timer"

EX1_NN = ("[in:send_message message [sl:recipient kira ] and [sl:recipient lena ] "
          "saying [sl:content_exact want to get drinks this week ]?]")
EX1_EXPECTED = ("[in:send_message [sl:recipient lizzie ] [sl:recipient trent ] "
                "[sl:content_exact they have any updates yet ] ]")
EX1_WITHOUT_NN = ("[in:get_message [sl:content_exact they have any updates yet ] "
                  "[sl:group lizzie ] [sl:group trent ] ]")
EX2_NN = "[in:stop_music [sl:music_type music ] ]"
EX2_EXPECTED = "[in:remove_from_playlist_music [sl:music_genre country ] ]"
EX2_WITHOUT_NN = "[in:play_music [sl:music_genre country ] ]"
EX3_NN = ("[in:remove_from_playlist_music delete [sl:music_artist_name mariah carey] "
          "[sl:music_type songs ] ]")
EX3_EXPECTED = "[in:remove_from_playlist_music [sl:music_artist_name mariah carey ] ]"
EX3_WITHOUT_NN = "[in:unsupported_music [sl:music_type songs ] ]"
EX3_MODEL = ("[in:remove_from_playlist_music [sl:music_type songs ] "
             "[sl:music_artist_name mariah carey ] ]")

KNOWN_FRAMES = [
    OVEN_TIMER,
    EX1_NN, EX1_EXPECTED, EX1_WITHOUT_NN,
    EX2_NN, EX2_EXPECTED, EX2_WITHOUT_NN,
    EX3_NN, EX3_EXPECTED, EX3_WITHOUT_NN, EX3_MODEL,
]

# Reference per-domain frame accuracies for three input modes.
DOMAIN_ACCURACY = {
    "without_nn": {"alarm": 86.67, "event": 83.83, "music": 79.80, "timer": 81.21,
                   "messaging": 93.50, "navigation": 82.96},
    "utterance_nn": {"alarm": 87.17, "event": 85.03, "music": 80.73, "timer": 81.75,
                     "messaging": 94.52, "navigation": 84.16},
    "semparse_nn": {"alarm": 88.57, "event": 84.77, "music": 80.71, "timer": 81.01,
                    "messaging": 94.65, "navigation": 85.20},
}
MACRO_ACCURACY = {"without_nn": 84.66, "utterance_nn": 85.56, "semparse_nn": 85.82}

SMALL_ROWS = [
    ("timer", OVEN_TIMER_UTT, OVEN_TIMER),
    ("messaging", "message kira and lena saying want to get drinks this week ?", EX1_NN),
    ("music", "no more music", EX2_NN),
    ("music", "delete mariah carey songs", EX3_NN),
    ("messaging", "message just lizzie and trent from my group if they have any updates yet ?",
     EX1_EXPECTED),
]


@pytest.fixture
def small_corpus():
    return corpus_from_rows(SMALL_ROWS, "train")


@pytest.fixture
def embedder():
    return HashedEmbedder(64, 0)


@pytest.fixture
def small_index(small_corpus, embedder):
    return build_index(
        (r.id, embedder.embed(r.id, r.utterance), r.domain, r.utterance) for r in small_corpus
    )
