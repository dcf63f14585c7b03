// Browser teleoperation client: drag or arrow keys steer the needle, the
// scene shows only the needle above the tissue and the surface itself.

import { BeepLatch, playBeep } from "./beep.js";
import { SessionClient } from "./client.js";
import {
  HAND_MAX,
  InputThrottle,
  KeyVelocityIntegrator,
  mapDragToHand,
} from "./input.js";
import {
  abortMessage,
  inputMessage,
  Modality,
  MODALITIES,
  startTrialMessage,
  TrialDoneMessage,
} from "./protocol.js";
import {
  DEFAULT_LAYOUT,
  barWidth,
  feedbackPanel,
  needleSegment,
  tissueRect,
} from "./scene.js";

const canvas = document.getElementById("scene") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
const layout = { ...DEFAULT_LAYOUT, width: canvas.width, height: canvas.height };

const modalitySelect = document.getElementById("modality") as HTMLSelectElement;
const delayInput = document.getElementById("delay") as HTMLInputElement;
const startButton = document.getElementById("start") as HTMLButtonElement;
const abortButton = document.getElementById("abort") as HTMLButtonElement;
const banner = document.getElementById("banner") as HTMLDivElement;
const prompt = document.getElementById("prompt") as HTMLDivElement;
const feedbackDiv = document.getElementById("feedback") as HTMLDivElement;
const results = document.getElementById("results") as HTMLDivElement;

for (const m of MODALITIES) {
  const option = document.createElement("option");
  option.value = m;
  option.textContent = m;
  modalitySelect.appendChild(option);
}

let trialActive = false;
let activeModality: Modality = "HF";
let extractionPrompted = false;
const beepLatch = new BeepLatch();
const keys = new KeyVelocityIntegrator();
const throttle = new InputThrottle();
let dragging = false;
let handZ = 0;
let audio: AudioContext | null = null;

const wsUrl = `${location.protocol === "https:" ? "wss" : "ws"}://${location.host}/session`;
const client = new SessionClient(wsUrl, {
  onStatus(status) {
    banner.hidden = status === "open";
    banner.textContent = status === "connecting" ? "reconnecting…" : "connection lost";
  },
  onMessage(message) {
    if (message.type === "trial_done") {
      trialActive = false;
      showResults(message);
      prompt.textContent = "trial finished";
    } else if (message.type === "error") {
      prompt.textContent = `server error: ${message.code}`;
    } else if (message.type === "ack") {
      trialActive = true;
      extractionPrompted = false;
      beepLatch.reset();
      results.hidden = true;
      prompt.textContent = "insert the needle; stop when you feel the fixture";
    }
  },
});
client.connect();

startButton.onclick = () => {
  activeModality = modalitySelect.value as Modality;
  handZ = 0;
  keys.hand = 0;
  client.send(startTrialMessage({
    modality: activeModality,
    feedback_delay_ms: Number(delayInput.value) || 0,
  }));
  audio = audio ?? new AudioContext();
};

abortButton.onclick = () => client.send(abortMessage());

canvas.addEventListener("pointerdown", (e) => {
  dragging = true;
  canvas.setPointerCapture(e.pointerId);
});
canvas.addEventListener("pointerup", () => (dragging = false));
canvas.addEventListener("pointermove", (e) => {
  if (!dragging) return;
  const rect = canvas.getBoundingClientRect();
  handZ = mapDragToHand(e.clientY - rect.top, 0, rect.height, HAND_MAX);
  keys.hand = handZ;
});
window.addEventListener("keydown", (e) => {
  if (keys.keyDown(e.key)) e.preventDefault();
});
window.addEventListener("keyup", (e) => keys.keyUp(e.key));

function showResults(message: TrialDoneMessage): void {
  const rows = Object.entries(message.metrics)
    .map(([key, value]) => {
      const shown =
        typeof value === "number" ? value.toPrecision(4) : String(value);
      return `<tr><td>${key}</td><td>${shown}</td></tr>`;
    })
    .join("");
  results.innerHTML = `<h3>trial metrics</h3><table>${rows}</table>`;
  results.hidden = false;
}

function renderFeedback(): void {
  const state = client.latestState;
  if (!trialActive || state === null) {
    feedbackDiv.innerHTML = "";
    return;
  }
  const panel = feedbackPanel(
    activeModality, state.visual_bar, state.index_stress, state.thumb_stress,
  );
  if (panel.kind === "kinesthetic") {
    feedbackDiv.innerHTML = `<div class="placeholder">kinesthetic device active</div>`;
  } else if (panel.kind === "bar") {
    const w = barWidth(panel.level, 300);
    feedbackDiv.innerHTML =
      `<div class="bar-frame"><div class="bar-fill" style="width:${w}px"></div></div>` +
      `<div class="label">contact force</div>`;
  } else {
    const gauge = (label: string, level: number) =>
      `<div class="gauge"><div class="gauge-fill" style="height:${level * 100}%"></div>` +
      `<span>${label}</span></div>`;
    feedbackDiv.innerHTML =
      gauge("index", panel.index) + gauge("thumb", panel.thumb) +
      `<div class="label">${panel.hand} hand</div>`;
  }
}

let lastFrame = performance.now();
function frame(now: number): void {
  const dt = Math.min((now - lastFrame) / 1000, 0.1);
  lastFrame = now;

  if (trialActive) {
    if (keys.active) handZ = keys.step(dt);
    const send = throttle.offer(handZ, now);
    if (send !== null) client.send(inputMessage(send));
  }

  const state = client.latestState;
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, layout.width, layout.height);
  if (state !== null) {
    const tissue = tissueRect(state.tissue_pct, layout);
    ctx.fillStyle = "#9fd3e6";
    ctx.fillRect(tissue.x, tissue.y, tissue.width, tissue.height);
    ctx.fillStyle = "#4d9fc0";
    ctx.fillRect(tissue.x, tissue.y, tissue.width, 3);

    const needle = needleSegment(state.needle_pct, state.tissue_pct, layout);
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 3;
    ctx.beginPath();
    ctx.moveTo(needle.x, needle.yTop);
    ctx.lineTo(needle.x, needle.yTip);
    ctx.stroke();

    if (beepLatch.shouldPlay(state.beep) && audio !== null) {
      playBeep(audio);
    }
    if (state.beep && !extractionPrompted) {
      extractionPrompted = true;
      prompt.textContent = "beep! pull the needle out now";
    }
  }
  renderFeedback();
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
