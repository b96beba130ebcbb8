"""
Scoring a run, rendering tables, and judging chat answers
=========================================================

The judge talks to any chat-completions style endpoint. Here a small local
server stands in for it.
"""

import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

from asrx.corpus import UtteranceRecord
from asrx.grammar import TaskKind
from asrx.judge import JudgeConfig, items_from_run, judge_items
from asrx.scoring import render_report, score_run

sgc = [
    UtteranceRecord("g1", "a.wav", 1.0, "CN", TaskKind.SGC, "帮我调大声音", tag="male"),
    UtteranceRecord("g2", "b.wav", 1.0, "CN", TaskKind.SGC, "今天天气不错", tag="female"),
    UtteranceRecord("g3", "c.wav", 1.0, "CN", TaskKind.SGC, "请关灯", tag="female"),
]
outputs = {"g1": "帮我调大声音<MALE>", "g2": "今天天气不错<MALE>", "g3": "请关灯"}
asr = [UtteranceRecord("a1", "d.wav", 1.0, "CN", TaskKind.ASR, "播放小梦想大梦想")]

reports = [score_run(sgc, outputs, TaskKind.SGC), score_run(asr, {"a1": "播放小梦想"}, TaskKind.ASR)]
text, csv_text = render_report(reports)
print(text)
print(csv_text)


class FakeJudge(BaseHTTPRequestHandler):
    def do_POST(self):
        self.rfile.read(int(self.headers["Content-Length"]))
        body = json.dumps({"choices": [{"message": {"role": "assistant", "content": "Score: 8/10"}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


server = HTTPServer(("127.0.0.1", 0), FakeJudge)
threading.Thread(target=server.serve_forever, daemon=True).start()
cfg = JudgeConfig(f"http://127.0.0.1:{server.server_address[1]}/v1/chat/completions", "judge-model")

chat = [UtteranceRecord("c1", "e.wav", 1.0, "CN", TaskKind.STTC, "我感觉不太满意", response="抱歉，我们会让你满意的。")]
summary = judge_items(items_from_run(chat, {"c1": "我感觉不太满意<开始回答>真抱歉，我们马上处理。"}), cfg)
print("judge mean:", summary.mean, summary.scores)
server.shutdown()
