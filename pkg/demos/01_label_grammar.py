"""
ASR+X targets: building, writing and reading them
=================================================

Every training target starts with the transcript and then carries the
task payload. This script walks through each task's surface form.
"""

from asrx.grammar import (
    AsrXLabel,
    TimedToken,
    extract_tag,
    parse_label,
    parse_timed_transcript,
    serialize_label,
)

# Classification tasks append one bracketed tag. Latin class names are
# stored lower-case and written upper-case.
ser = AsrXLabel.tagged("SER", "你一个享受者你有什么跟这个复仇者去叫板呢", "anger")
print(serialize_label(ser))

# Chinese style labels are written as-is.
print(serialize_label(AsrXLabel.tagged("SSR", "小猪皮革恍然大悟", "童话故事")))

# Timestamped transcripts: one <start>token<end> triple per character or word,
# two decimals. Neighbouring tokens may overlap slightly.
tokens = parse_timed_transcript("<0.21>父<0.47> <0.46>母<0.60> <0.60>的<0.73>")
for tok in tokens:
    print(f"{tok.token}: {tok.start:.2f}-{tok.end:.2f}")
srwt = AsrXLabel.timestamped(tokens + [TimedToken("话", 0.86, 1.09)])
print(srwt.transcript, "->", serialize_label(srwt))

# Chat targets put the answer after the <开始回答> separator.
sttc = parse_label("STTC", "我感觉不太满意<开始回答>抱歉，我们会让你满意的。")
print("question:", sttc.transcript, "| answer:", sttc.response)

# Parsing is strict by default; tolerant mode forgives case and whitespace.
print(parse_label("SGC", "  帮我调大声音<Male>\n", tolerant=True))

# Model outputs are messier. extract_tag takes the last valid class tag and
# returns None when there is none, so scoring can count it as wrong.
print(extract_tag("SER", "文本<NOISE>结尾<HAPPY>"))
print(extract_tag("SGC", "no tag here"))
