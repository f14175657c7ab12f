import { AnnotationApi } from "./api.js";
import { AnnotationWizard } from "./wizard.js";

function annotatorFromLocation(): string | null {
  const params = new URLSearchParams(window.location.search);
  return params.get("annotator");
}

function boot(): void {
  const root = document.getElementById("app");
  if (!root) {
    return;
  }
  const annotator = annotatorFromLocation();
  if (!annotator) {
    root.innerHTML = `
      <main class="card">
        <h2>Annotation</h2>
        <form id="who">
          <label>Your annotator name: <input name="annotator" autofocus /></label>
          <button type="submit">Start</button>
        </form>
      </main>
    `;
    root.querySelector("#who")!.addEventListener("submit", (event) => {
      event.preventDefault();
      const input = root.querySelector<HTMLInputElement>("input[name=annotator]")!;
      const name = input.value.trim();
      if (name) {
        window.location.search = `?annotator=${encodeURIComponent(name)}`;
      }
    });
    return;
  }
  const wizard = new AnnotationWizard(root, new AnnotationApi(annotator));
  void wizard.start();
}

boot();
