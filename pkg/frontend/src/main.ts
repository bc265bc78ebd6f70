import { ReviewApiClient } from "./client.js";
import { SubmissionQueue } from "./queue.js";
import { ReviewSession } from "./session.js";

/** Browser entry point: binds a ReviewSession to the DOM. */
export async function mount(root: HTMLElement, baseUrl = ""): Promise<void> {
  const client = new ReviewApiClient(baseUrl);
  const queue = new SubmissionQueue(client);
  const annotator = localStorage.getItem("annotator_id") ?? "reviewer";
  const session = new ReviewSession(client, queue, annotator);

  root.innerHTML = `
    <header>
      <h1>Sample review</h1>
      <span id="remaining"></span>
      <span id="queue-state"></span>
    </header>
    <main>
      <p id="instruction"></p>
      <div class="pair">
        <figure><img id="original" alt="original person"><figcaption>original</figcaption></figure>
        <figure><img id="edited" alt="edited person"><figcaption>edited</figcaption></figure>
      </div>
      <p class="hint">press <kbd>k</kbd> to keep, <kbd>d</kbd> to discard</p>
    </main>
    <aside>
      <label>threshold <input id="threshold" type="range" min="0" max="100" value="80"></label>
      <table id="matrix">
        <tr><th></th><th>keep</th><th>discard</th></tr>
        <tr><th>score &gt; t</th><td id="gk"></td><td id="gd"></td></tr>
        <tr><th>score &le; t</th><td id="bk"></td><td id="bd"></td></tr>
      </table>
      <p id="accuracy"></p>
    </aside>`;

  const byId = (id: string) => root.querySelector<HTMLElement>(`#${id}`)!;

  function renderCurrent(): void {
    const item = session.current;
    byId("remaining").textContent = `${session.remaining} pending`;
    byId("queue-state").textContent =
      queue.pendingCount > 0 ? `${queue.pendingCount} unsent (retrying)` : "";
    byId("instruction").textContent = item?.instruction ?? "all done";
    const original = byId("original") as HTMLImageElement;
    const edited = byId("edited") as HTMLImageElement;
    original.src = item ? `${baseUrl}${item.original_uri}` : "";
    edited.src = item ? `${baseUrl}${item.edited_uri}` : "";
  }

  async function renderCalibration(): Promise<void> {
    const t = Number((byId("threshold") as HTMLInputElement).value);
    const report = await session.refreshCalibration(t);
    byId("gk").textContent = String(report.counts.good_keep);
    byId("gd").textContent = String(report.counts.good_discard);
    byId("bk").textContent = String(report.counts.bad_keep);
    byId("bd").textContent = String(report.counts.bad_discard);
    byId("accuracy").textContent =
      `accuracy ${report.accuracy.toFixed(1)}% (n=${report.total})`;
  }

  document.addEventListener("keydown", async (event) => {
    await session.handleKey(event.key);
    renderCurrent();
    await renderCalibration();
  });
  byId("threshold").addEventListener("input", () => void renderCalibration());

  await session.load();
  renderCurrent();
  await renderCalibration();
}
