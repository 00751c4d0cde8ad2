import pytest

from modelserver.nlp import (
    HeuristicError,
    answer_question,
    caption_for,
    highlighted_span,
    make_question,
    noun_phrases,
    tag_text,
    tag_word,
    tokenize,
)


class TestTokenizerAndTagger:
    def test_offsets_index_the_source_string(self):
        text = "The lynx, it said, weighs 40 kilograms!"
        for word, offset in tokenize(text):
            assert text[offset : offset + len(word)] == word

    def test_underscores_split_tokens(self):
        assert [w for w, _ in tokenize("snake_case words")] == ["snake", "case", "words"]

    @pytest.mark.parametrize(
        "word,offset,tag",
        [
            ("the", 5, "DET"),
            ("They", 5, "PRON"),
            ("seven", 5, "NUM"),
            ("40", 5, "NUM"),
            ("red", 5, "ADJ"),
            ("of", 5, "OTHER"),
            ("Nairobi", 5, "PROPN"),
            ("Nairobi", 0, "NOUN"),  # sentence-initial capitals are not evidence
            ("tundra", 5, "NOUN"),
        ],
    )
    def test_word_classes(self, word, offset, tag):
        assert tag_word(word, offset) == tag

    def test_tag_text_round_trip(self):
        tags = [t.tag for t in tag_text("The red lynx weighs forty kilograms")]
        assert tags == ["DET", "ADJ", "NOUN", "OTHER", "NUM", "NOUN"]


class TestNounPhrases:
    def test_determiner_phrases_never_returned(self):
        phrases = noun_phrases("the cat sat")
        assert [p.text for p in phrases] == ["cat"]

    def test_pronoun_spans_excluded(self):
        phrases = noun_phrases("It hunts near the frozen river at dawn.")
        texts = [p.text for p in phrases]
        assert "It" not in texts
        assert "frozen river" in texts

    def test_adjectives_attach_to_their_noun(self):
        phrases = noun_phrases("A warm stove and an open window.")
        assert [p.text for p in phrases] == ["warm stove", "open window"]

    def test_bare_adjective_runs_are_not_phrases(self):
        assert noun_phrases("very red and warm") == []

    def test_offsets_and_tags_align(self):
        text = "Traders from Nairobi sell golden honey."
        for phrase in noun_phrases(text):
            assert text[phrase.offset : phrase.offset + len(phrase.text)] == phrase.text
            assert len(phrase.tags) == len(tokenize(phrase.text))

    def test_offsets_strictly_increase(self):
        text = "The lynx can jump nine feet across the open tundra."
        offsets = [p.offset for p in noun_phrases(text)]
        assert offsets == sorted(offsets) and len(set(offsets)) == len(offsets)

    def test_unicode_text_offsets(self):
        text = "Le café noir de Zoë reste ouvert."
        for phrase in noun_phrases(text):
            assert text[phrase.offset : phrase.offset + len(phrase.text)] == phrase.text


class TestCaptioner:
    def test_reference_words_survive(self):
        assert caption_for("img-red-lynx-01.jpg") == "a photo of red lynx"

    def test_path_and_extension_stripped(self):
        assert caption_for("images/2024/photo_of_heron.png") == "a photo of heron"

    def test_digits_only_reference_is_an_error(self):
        with pytest.raises(HeuristicError, match="describable"):
            caption_for("img-0123.png")

    def test_deterministic(self):
        assert caption_for("img-lynx-01") == caption_for("img-lynx-01")


class TestQuestionGeneration:
    def test_span_extraction(self):
        assert highlighted_span("before <hl> nine feet <hl> after") == "nine feet"

    def test_numeric_span_gets_quantity_question(self):
        assert make_question("jumps <hl> nine feet <hl> far") == "how much is nine feet?"

    def test_entity_span_gets_what_question(self):
        assert make_question("the <hl> frozen river <hl> bends") == "what is frozen river?"

    @pytest.mark.parametrize(
        "bad",
        ["no markers at all", "<hl> unclosed", "<hl>   <hl> empty span"],
    )
    def test_bad_highlighting_is_an_error(self, bad):
        with pytest.raises(HeuristicError):
            make_question(bad)


class TestQuestionAnswering:
    PASSAGE = "The lynx can jump nine feet across the open tundra."

    def test_full_phrase_extracted_in_passage_surface_form(self):
        assert answer_question("how much is nine feet?", self.PASSAGE) == "nine feet"

    def test_case_insensitive_but_surface_from_passage(self):
        assert answer_question("what is NINE FEET?", self.PASSAGE) == "nine feet"

    def test_longest_prefix_wins_when_phrase_truncated(self):
        # "nine inches" only matches on "nine"
        assert answer_question("what is nine inches?", self.PASSAGE) == "nine"

    def test_unanswerable_returns_unknown(self):
        assert answer_question("what is marble?", self.PASSAGE) == "unknown"
        assert answer_question("why though?", self.PASSAGE) == "unknown"

    def test_round_trip_with_generated_question(self):
        highlighted = "The lynx can jump <hl> nine feet <hl> across the open tundra."
        question = make_question(highlighted)
        assert answer_question(question, self.PASSAGE) == "nine feet"
